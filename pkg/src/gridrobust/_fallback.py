"""Pure numpy implementation of the DC power-flow kernels.

Mirrors ``_kernels.pyx`` call for call. Every array argument is expected in
the dtype produced by :class:`gridrobust.grid.Grid` (int64 endpoints, float64
values, uint8 masks).
"""

import numpy as np

# Kernel status codes, shared with the compiled backend.
OK = 0
ISLANDED = 1
SINGULAR = 2

PIVOT_TOL = 1e-12  # compiled backend only
INJECTION_TOL = 1e-9


def _components(n_bus, frm, to, conn):
    """Component root of every bus (union-find over connected lines)."""
    parent = list(range(n_bus))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for f, t, c in zip(frm.tolist(), to.tolist(), conn.tolist()):
        if c:
            rf, rt = root(f), root(t)
            if rf != rt:
                parent[rf] = rt
    return np.array([root(i) for i in range(n_bus)])


def solve_arrays(frm, to, b, conn, p, slack, base_mva):
    """Solve one DC power flow.

    Returns ``(theta, flow, in_slack, status)``. ``in_slack`` flags buses that
    share a component with the slack bus. ``status`` is ISLANDED when some bus
    outside that component carries a nonzero injection.
    """
    n_bus = p.shape[0]
    labels = _components(n_bus, frm, to, conn)
    in_slack = labels == labels[slack]

    theta = np.zeros(n_bus)
    flow = np.zeros(frm.shape[0])
    status = OK
    if np.any(np.abs(p[~in_slack]) > INJECTION_TOL):
        status = ISLANDED

    active = conn.astype(bool) & in_slack[frm]
    buses = np.flatnonzero(in_slack)
    buses = buses[buses != slack]
    if buses.size:
        pos = np.full(n_bus, -1)
        pos[buses] = np.arange(buses.size)
        k = buses.size
        f, t, bl = pos[frm[active]], pos[to[active]], b[active]
        # slack maps to the scratch row/column k, dropped before solving
        f = np.where(f < 0, k, f)
        t = np.where(t < 0, k, t)
        n = k + 1
        cells = np.concatenate((f * n + f, t * n + t, f * n + t, t * n + f))
        vals = np.concatenate((bl, bl, -bl, -bl))
        bmat = np.bincount(cells, vals, minlength=n * n).reshape(n, n)
        try:
            theta[buses] = np.linalg.solve(bmat[:k, :k], p[buses] / base_mva)
        except np.linalg.LinAlgError:
            return theta, flow, in_slack, SINGULAR

    flow[active] = base_mva * b[active] * (theta[frm[active]] - theta[to[active]])
    return theta, flow, in_slack, status


def n1_scores(frm, to, b, limit, conn, p, slack, base_mva, outages):
    """Stability score per outage: 1 if removing that line leaves no overflow
    and no islanded load, else 0. Already-open lines are scored on the
    current state."""
    scores = np.zeros(outages.shape[0], dtype=np.int8)
    for k, line in enumerate(outages):
        trial = conn.copy()
        trial[line] = 0
        _, flow, _, status = solve_arrays(frm, to, b, trial, p, slack, base_mva)
        if status != OK:
            continue
        scores[k] = not np.any(np.abs(flow) / limit > 1.0)
    return scores
