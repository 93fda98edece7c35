"""Benchmark the crack-growth Euler kernels: numba against pure numpy.

Runs both implementations regardless of the active backend and prints
median wall times for a single trajectory and for a 1000-row batch.

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from degfusion import _kernels
from degfusion.reference import PARIS_NOMINAL, paris_grid


def median_time(fn, repeats=9):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def main():
    pts = paris_grid().points
    cap, max_step = 0.5, 5.0
    x = PARIS_NOMINAL
    X = np.tile(x, (1000, 1)) * np.random.default_rng(0).uniform(
        0.98, 1.02, (1000, 6))

    impls = {"numpy": _kernels._numpy_impls()}
    try:
        impls["numba"] = _kernels._numba_impls()
    except ImportError:
        print("numba unavailable; benchmarking the numpy path only")

    results = {}
    for name, (scalar, batch) in impls.items():
        # Warm up (and compile, for the jitted path) before timing.
        scalar(x[0], x[1], x[2], x[3], x[4], x[5], pts, cap, max_step)
        batch(X, pts, cap, max_step)
        t_scalar = median_time(lambda: scalar(
            x[0], x[1], x[2], x[3], x[4], x[5], pts, cap, max_step))
        t_batch = median_time(lambda: batch(X, pts, cap, max_step))
        results[name] = (t_scalar, t_batch)

    print(f"grid points: {pts.size}, batch rows: {X.shape[0]}")
    print(f"{'backend':>8} {'single trajectory':>20} {'batch of 1000':>16}")
    for name, (t_scalar, t_batch) in results.items():
        print(f"{name:>8} {t_scalar * 1e6:>17.1f} us {t_batch * 1e3:>13.1f} ms")
    if len(results) == 2:
        s = results["numpy"][0] / results["numba"][0]
        b = results["numpy"][1] / results["numba"][1]
        print(f"numba speedup: {s:.1f}x single, {b:.1f}x batch")


if __name__ == "__main__":
    main()
