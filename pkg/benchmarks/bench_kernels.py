"""Time the compiled and pure-Python kernels on the bundled 14-bus grid.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Reports microseconds per call for a single DC solve and for a full N-1
sweep over the attackable lines, and checks both backends agree.
"""

import argparse
import timeit

import numpy as np

from gridrobust import _fallback, bundled_grid

try:
    from gridrobust import _kernels
except ImportError:
    _kernels = None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    grid = bundled_grid()
    rng = np.random.default_rng(0)
    p = grid.base_injections() * rng.uniform(0.6, 1.1)
    p[grid.slack_index] -= p.sum()
    mask = grid.mask(None)
    outages = np.array([grid.line_index[i] for i in grid.attackable_ids], dtype=np.int64)
    solve_args = (grid.frm, grid.to, grid.susceptance, mask, p, grid.slack_index, grid.base_mva)
    sweep_args = (grid.frm, grid.to, grid.susceptance, grid.limits, mask, p,
                  grid.slack_index, grid.base_mva, outages)

    backends = [("python", _fallback)]
    if _kernels is not None:
        backends.insert(0, ("cython", _kernels))
    else:
        print("compiled extension not built; timing the fallback only")

    times = {}
    for name, mod in backends:
        t_solve = timeit.timeit(lambda: mod.solve_arrays(*solve_args), number=args.repeat)
        t_sweep = timeit.timeit(lambda: mod.n1_scores(*sweep_args), number=args.repeat)
        times[name] = (t_solve / args.repeat * 1e6, t_sweep / args.repeat * 1e6)
        print(f"{name:>7}: solve {times[name][0]:9.1f} us   N-1 sweep ({outages.size} outages) "
              f"{times[name][1]:9.1f} us")

    if len(backends) == 2:
        fa = _fallback.solve_arrays(*solve_args)[1]
        ka = _kernels.solve_arrays(*solve_args)[1]
        same = np.array_equal(_fallback.n1_scores(*sweep_args), _kernels.n1_scores(*sweep_args))
        print(f"max flow difference {np.max(np.abs(fa - ka)):.3e} MW, N-1 scores equal: {same}")
        print(f"speed-up: solve x{times['python'][0] / times['cython'][0]:.0f}, "
              f"sweep x{times['python'][1] / times['cython'][1]:.0f}")


if __name__ == "__main__":
    main()
