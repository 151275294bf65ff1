#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run the default (numba) build:

    python benchmarks/bench_kernels.py

The numpy-only path is what you get with GROUND3D_NO_NUMBA=1; both
implementations are importable side by side, so one process times both.
"""

import time

import numpy as np

from ground3d import kernels


def timeit(fn, *args, repeats=200, warmup=5):
    for _ in range(warmup):
        fn(*args)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return np.median(times) * 1e6  # microseconds


def bench_box_distances(rng, n):
    centers = rng.normal(size=(n, 3)) * 4
    extents = rng.uniform(0.05, 0.8, size=(n, 3))
    anchor_c = rng.normal(size=3)
    anchor_e = rng.uniform(0.05, 0.8, size=3)
    args = (centers, extents, anchor_c, anchor_e)
    return timeit(kernels.box_gap_distances, *args), timeit(kernels.box_gap_distances_np, *args)


def bench_between(rng, n):
    centers = rng.normal(size=(n, 3)) * 4
    a1, a2 = rng.normal(size=3), rng.normal(size=3)
    args = (centers, a1, a2, 2.0)
    return timeit(kernels.between_scores, *args), timeit(kernels.between_scores_np, *args)


def bench_grid_nearest(rng, side):
    cells = rng.random((side, side)) > 0.3
    args = (cells, 0.0, 0.0, 0.1, side * 0.05, side * 0.05)
    return timeit(kernels.grid_nearest_cell, *args), timeit(kernels.grid_nearest_cell_np, *args)


def bench_grid_standoff(rng, side):
    cells = rng.random((side, side)) > 0.3
    args = (cells, 0.0, 0.0, 0.1, side * 0.05, side * 0.05, 0.5, -1.0)
    return timeit(kernels.grid_standoff_cell, *args), timeit(kernels.grid_standoff_cell_np, *args)


def main():
    if not kernels.USING_NUMBA:
        print("numba path inactive (GROUND3D_NO_NUMBA set or numba missing); nothing to compare")
        return
    kernels.warmup()
    rng = np.random.default_rng(0)
    rows = []
    for n in (10, 50, 200):
        rows.append((f"box_gap_distances n={n}", *bench_box_distances(rng, n)))
        rows.append((f"between_scores    n={n}", *bench_between(rng, n)))
    for side in (40, 80, 200):
        rows.append((f"grid_nearest  {side}x{side}", *bench_grid_nearest(rng, side)))
        rows.append((f"grid_standoff {side}x{side}", *bench_grid_standoff(rng, side)))

    print(f"{'kernel':<28} {'numba (us)':>12} {'numpy (us)':>12} {'speedup':>9}")
    for name, nb, npy in rows:
        print(f"{name:<28} {nb:>12.1f} {npy:>12.1f} {npy / nb:>8.2f}x")


if __name__ == "__main__":
    main()
