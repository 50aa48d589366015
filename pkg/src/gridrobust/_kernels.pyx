# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DC power-flow kernels.

Same signatures and status codes as ``_fallback``. The dense reduced
susceptance matrix is factored with partial-pivot Gaussian elimination,
which beats a LAPACK call at the few-dozen-bus sizes this package targets
because no Python objects are created per solve.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef enum:
    C_OK = 0
    C_ISLANDED = 1
    C_SINGULAR = 2

OK = C_OK
ISLANDED = C_ISLANDED
SINGULAR = C_SINGULAR

cdef double PIVOT_TOL = 1e-12
cdef double INJECTION_TOL = 1e-9

_pivot_tol = PIVOT_TOL
_injection_tol = INJECTION_TOL


cdef Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef int _solve(const cnp.int64_t[::1] frm, const cnp.int64_t[::1] to,
                const double[::1] b, const cnp.uint8_t[::1] conn,
                const double[::1] p, Py_ssize_t slack, double base_mva,
                double[::1] theta, double[::1] flow, cnp.uint8_t[::1] in_slack,
                Py_ssize_t[::1] parent, Py_ssize_t[::1] pos,
                double[:, ::1] mat, double[::1] rhs) noexcept nogil:
    cdef Py_ssize_t n_bus = p.shape[0]
    cdef Py_ssize_t n_line = frm.shape[0]
    cdef Py_ssize_t i, j, l, r, c, piv, root, k = 0
    cdef Py_ssize_t fi, ti
    cdef double y, best, factor, tmp
    cdef int status = C_OK

    for i in range(n_bus):
        parent[i] = i
        theta[i] = 0.0
    for l in range(n_line):
        flow[l] = 0.0
        if conn[l]:
            fi = _find(parent, frm[l])
            ti = _find(parent, to[l])
            if fi != ti:
                parent[fi] = ti

    root = _find(parent, slack)
    for i in range(n_bus):
        in_slack[i] = _find(parent, i) == root
        if in_slack[i] and i != slack:
            pos[i] = k
            k += 1
        else:
            pos[i] = -1
            if not in_slack[i] and fabs(p[i]) > INJECTION_TOL:
                status = C_ISLANDED

    if k > 0:
        for r in range(k):
            rhs[r] = 0.0
            for c in range(k):
                mat[r, c] = 0.0
        for i in range(n_bus):
            if pos[i] >= 0:
                rhs[pos[i]] = p[i] / base_mva
        for l in range(n_line):
            if not conn[l] or not in_slack[frm[l]]:
                continue
            fi = pos[frm[l]]
            ti = pos[to[l]]
            y = b[l]
            if fi >= 0:
                mat[fi, fi] += y
            if ti >= 0:
                mat[ti, ti] += y
            if fi >= 0 and ti >= 0:
                mat[fi, ti] -= y
                mat[ti, fi] -= y

        for c in range(k):
            piv = c
            best = fabs(mat[c, c])
            for r in range(c + 1, k):
                if fabs(mat[r, c]) > best:
                    best = fabs(mat[r, c])
                    piv = r
            if best < PIVOT_TOL:
                return C_SINGULAR
            if piv != c:
                for j in range(c, k):
                    tmp = mat[c, j]
                    mat[c, j] = mat[piv, j]
                    mat[piv, j] = tmp
                tmp = rhs[c]
                rhs[c] = rhs[piv]
                rhs[piv] = tmp
            for r in range(c + 1, k):
                factor = mat[r, c] / mat[c, c]
                if factor != 0.0:
                    for j in range(c, k):
                        mat[r, j] -= factor * mat[c, j]
                    rhs[r] -= factor * rhs[c]
        for r in range(k - 1, -1, -1):
            tmp = rhs[r]
            for j in range(r + 1, k):
                tmp -= mat[r, j] * rhs[j]
            rhs[r] = tmp / mat[r, r]
        for i in range(n_bus):
            if pos[i] >= 0:
                theta[i] = rhs[pos[i]]

    for l in range(n_line):
        if conn[l] and in_slack[frm[l]]:
            flow[l] = base_mva * b[l] * (theta[frm[l]] - theta[to[l]])
    return status


def solve_arrays(const cnp.int64_t[::1] frm, const cnp.int64_t[::1] to,
                 const double[::1] b, const cnp.uint8_t[::1] conn,
                 const double[::1] p, Py_ssize_t slack, double base_mva):
    cdef Py_ssize_t n_bus = p.shape[0]
    theta = np.zeros(n_bus)
    flow = np.zeros(frm.shape[0])
    in_slack = np.zeros(n_bus, dtype=np.uint8)
    parent = np.empty(n_bus, dtype=np.intp)
    pos = np.empty(n_bus, dtype=np.intp)
    mat = np.empty((n_bus, n_bus))
    rhs = np.empty(n_bus)
    cdef int status
    cdef double[::1] theta_v = theta, flow_v = flow, rhs_v = rhs
    cdef cnp.uint8_t[::1] in_slack_v = in_slack
    cdef Py_ssize_t[::1] parent_v = parent, pos_v = pos
    cdef double[:, ::1] mat_v = mat
    with nogil:
        status = _solve(frm, to, b, conn, p, slack, base_mva, theta_v, flow_v,
                        in_slack_v, parent_v, pos_v, mat_v, rhs_v)
    if status == C_SINGULAR:
        theta[:] = 0.0
        flow[:] = 0.0
    return theta, flow, in_slack.astype(bool), status


def n1_scores(const cnp.int64_t[::1] frm, const cnp.int64_t[::1] to,
              const double[::1] b, const double[::1] limit,
              const cnp.uint8_t[::1] conn, const double[::1] p,
              Py_ssize_t slack, double base_mva,
              const cnp.int64_t[::1] outages):
    cdef Py_ssize_t n_bus = p.shape[0]
    cdef Py_ssize_t n_line = frm.shape[0]
    cdef Py_ssize_t n_out = outages.shape[0]
    scores = np.zeros(n_out, dtype=np.int8)
    trial = np.empty(n_line, dtype=np.uint8)
    theta = np.empty(n_bus)
    flow = np.empty(n_line)
    in_slack = np.empty(n_bus, dtype=np.uint8)
    parent = np.empty(n_bus, dtype=np.intp)
    pos = np.empty(n_bus, dtype=np.intp)
    mat = np.empty((n_bus, n_bus))
    rhs = np.empty(n_bus)
    cdef cnp.int8_t[::1] s_v = scores
    cdef cnp.uint8_t[::1] trial_v = trial, in_slack_v = in_slack
    cdef double[::1] theta_v = theta, flow_v = flow, rhs_v = rhs
    cdef Py_ssize_t[::1] parent_v = parent, pos_v = pos
    cdef double[:, ::1] mat_v = mat
    cdef Py_ssize_t o, l
    cdef int status, ok
    with nogil:
        for o in range(n_out):
            for l in range(n_line):
                trial_v[l] = conn[l]
            trial_v[outages[o]] = 0
            status = _solve(frm, to, b, trial_v, p, slack, base_mva, theta_v,
                            flow_v, in_slack_v, parent_v, pos_v, mat_v, rhs_v)
            if status != C_OK:
                s_v[o] = 0
                continue
            ok = 1
            for l in range(n_line):
                if fabs(flow_v[l]) / limit[l] > 1.0:
                    ok = 0
                    break
            s_v[o] = ok
    return scores
