#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the four numeric hot kernels at pipeline-realistic sizes and prints
one table with the speedup of the Cython extension over the fallback.

    python benchmarks/backend_bench.py [--repeats 5]
"""

import argparse
import statistics
import time

import numpy as np

from vidagg._core import fallback

try:
    from vidagg._core import _kernels
except ImportError:
    _kernels = None

SIZES = {
    "sqdist_matrix": [(2000, 256, 32), (5000, 256, 64)],
    "chi2_distance_matrix": [(400, 400, 96), (1000, 1000, 256)],
    "gmm_log_joint": [(2000, 256, 32), (5000, 256, 64)],
    "fv_sums": [(2000, 256, 32), (5000, 256, 64)],
}


def make_args(name, shape, rng):
    n, k, d = shape
    if name == "sqdist_matrix":
        return (rng.standard_normal((n, d)), rng.standard_normal((k, d)))
    if name == "chi2_distance_matrix":
        return (rng.random((n, d)), rng.random((k, d)), 1e-10)
    if name == "gmm_log_joint":
        return (
            rng.standard_normal((n, d)),
            rng.standard_normal((k, d)),
            rng.random((k, d)) + 0.1,
            np.log(np.full(k, 1.0 / k)),
        )
    gamma = rng.random((n, k))
    gamma /= gamma.sum(axis=1, keepdims=True)
    return (
        rng.standard_normal((n, d)),
        gamma,
        rng.standard_normal((k, d)),
        rng.random((k, d)) + 0.5,
    )


def best_time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    opts = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':24s} {'(n, k, d)':>18s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, shapes in SIZES.items():
        for shape in shapes:
            args = make_args(name, shape, rng)
            py = best_time(getattr(fallback, name), args, opts.repeats)
            if _kernels is None:
                print(f"{name:24s} {str(shape):>18s} {py * 1e3:9.2f}ms {'n/a':>10s} {'n/a':>8s}")
                continue
            cy = best_time(getattr(_kernels, name), args, opts.repeats)
            print(
                f"{name:24s} {str(shape):>18s} {py * 1e3:9.2f}ms {cy * 1e3:9.2f}ms "
                f"{py / cy:7.1f}x"
            )
    if _kernels is None:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
