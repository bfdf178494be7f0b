"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_dp.py [--grid 2000] [--pieces 8] [--nodes 200000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from reluforge import kernels
from reluforge.pwl import _grid_moments


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid", type=int, default=2000, help="DP grid resolution")
    p.add_argument("--pieces", type=int, default=8, help="DP piece count")
    p.add_argument("--nodes", type=int, default=200_000, help="nodes for the simplifier")
    p.add_argument("--repeat", type=int, default=3, help="timing repeats (best is reported)")
    args = p.parse_args(argv)

    edges = np.linspace(0.0, 1.0, args.grid + 1)
    P0, P1, P2 = _grid_moments(np.exp, edges)
    rng = np.random.default_rng(0)
    t = np.cumsum(rng.uniform(0.1, 1.0, args.nodes))
    v = np.abs(np.sin(t / 50.0)) * 10.0

    print("kernel, backend, seconds")
    results = {}
    for name in sorted(kernels.BACKENDS):
        dp = kernels.BACKENDS[name]
        simplify = kernels.SIMPLIFIERS[name]
        results[name] = (
            _best(lambda: dp(P0, P1, P2, edges, args.pieces), args.repeat),
            _best(lambda: simplify(t, v, 1e-9), args.repeat),
        )
        print(f"segmented_dp, {name}, {results[name][0]:.4f}")
        print(f"simplify_nodes, {name}, {results[name][1]:.4f}")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        print(f"speedup, segmented_dp, {py[0] / cy[0]:.1f}x")
        print(f"speedup, simplify_nodes, {py[1] / cy[1]:.1f}x")
    else:
        print("compiled extension not available; only the Python backend was timed")


if __name__ == "__main__":
    main()
