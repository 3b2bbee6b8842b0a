"""Timing of the compiled time-marching kernel against the NumPy fallback.

Run ``python benchmarks/bench_cq.py [--m 200] [--n 2000] [--repeat 3]``.
"""
import argparse
import time

import numpy as np

from fracinv import fem
from fracinv.backend import march_compiled, march_python
from fracinv.fem_cq import cq_weights
from fracinv.problem import SpaceGrid, TimeGrid


def _system(m, n, alpha=0.5):
    grid = SpaceGrid(m)
    tg = TimeGrid(1.0, n)
    x = grid.nodes
    M = fem.mass(grid)
    S = fem.operator(grid, np.ones(m + 1), x * (1 - x))
    cw = tg.dt ** -alpha
    A = M.scaled(cw) + S
    loads = np.zeros((n, m))
    loads[n // 2:, 0] = 1.0
    return cq_weights(alpha, n + 1).w, cw, M, A, loads


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), np.asarray(out)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    w, cw, M, A, loads = _system(args.m, args.n)
    tp, up = _best(lambda: march_python(w, cw, M.d, M.e, A.d, A.e, loads), args.repeat)
    print(f"numpy    m={args.m} n={args.n}: {tp * 1e3:8.1f} ms")
    if march_compiled is None:
        print("compiled extension not built")
        return
    tc, uc = _best(lambda: march_compiled(w, cw, M.d, M.e, A.d, A.e, loads), args.repeat)
    print(f"compiled m={args.m} n={args.n}: {tc * 1e3:8.1f} ms")
    print(f"speed-up {tp / tc:.1f}x, max difference {np.max(np.abs(up - uc)):.1e}")


if __name__ == "__main__":
    main()
