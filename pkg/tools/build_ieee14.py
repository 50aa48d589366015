"""Regenerates src/gridrobust/data/ieee14.json.

IEEE 14-bus topology and branch reactances; susceptance = 1/x. Each thermal
limit is the largest of a 10 MW floor, 1.3x the intact base-case flow and
0.7x the worst flow after any single attackable-line outage at base load,
rounded up to 0.1 MW. The intact grid therefore holds up to 1.3x base load
and every attackable single outage up to at least 0.7x.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

from gridrobust.grid import Grid, Line, solve_dc

BRANCHES = [  # (from, to, x)
    (1, 2, 0.05917), (1, 5, 0.22304), (2, 3, 0.19797), (2, 4, 0.17632),
    (2, 5, 0.17388), (3, 4, 0.17103), (4, 5, 0.04211), (4, 7, 0.20912),
    (4, 9, 0.55618), (5, 6, 0.25202), (6, 11, 0.19890), (6, 12, 0.25581),
    (6, 13, 0.13027), (7, 8, 0.17615), (7, 9, 0.11001), (9, 10, 0.08450),
    (9, 14, 0.27038), (10, 11, 0.19207), (12, 13, 0.19988), (13, 14, 0.34802),
]
LOADS = {2: 21.7, 3: 94.2, 4: 47.8, 5: 7.6, 6: 11.2, 9: 29.5, 10: 9.0,
         11: 3.5, 12: 6.1, 13: 13.5, 14: 14.9}
GENS = {1: 219.0, 2: 40.0}
INTACT_MARGIN = 1.3
OUTAGE_SECURE_SCALE = 0.7
# lines whose outage can be covered by moderate limit increases; outages of
# 1-2, 2-3 and 5-6 carry too much of the grid and 7-8 never carries flow
ATTACKABLE = [2, 4, 5, 6, 7, 8, 9, 12, 16, 20]


def build():
    buses = tuple(f"B{i}" for i in range(1, 15))
    lines = [Line(k + 1, f"B{f}", f"B{t}", round(1.0 / x, 6), 1e9)
             for k, (f, t, x) in enumerate(BRANCHES)]
    loads = tuple((f"B{b}", v) for b, v in LOADS.items())
    gens = tuple((f"B{b}", v) for b, v in GENS.items())
    grid = Grid(buses, "B1", tuple(lines), frozenset(ATTACKABLE), 100.0, "ieee14",
                loads, gens)
    p = grid.base_injections()
    need = INTACT_MARGIN * np.abs(solve_dc(grid, p).flow)
    for k in ATTACKABLE:
        rest = [ln.id for ln in lines if ln.id != k]
        need = np.maximum(need, OUTAGE_SECURE_SCALE * np.abs(solve_dc(grid, p, rest).flow))
    limits = [max(10.0, math.ceil(x * 10) / 10) for x in need]
    lines = [Line(ln.id, ln.from_bus, ln.to_bus, ln.susceptance, lim)
             for ln, lim in zip(lines, limits)]
    return Grid(buses, "B1", tuple(lines), frozenset(ATTACKABLE), 100.0, "ieee14",
                loads, gens)


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "src/gridrobust/data/ieee14.json")
    grid = build()
    out.write_text(json.dumps(grid.to_dict(), indent=2) + "\n")
    sol = solve_dc(grid, grid.base_injections())
    for ln, f, r in zip(grid.lines, sol.flow, sol.rho):
        print(f"{ln.id:3d} {ln.from_bus:>4}-{ln.to_bus:<4} flow {f:8.2f}  limit {ln.thermal_limit:7.1f}  rho {r:.3f}")
