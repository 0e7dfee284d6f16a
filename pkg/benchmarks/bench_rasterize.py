#!/usr/bin/env python3
"""Compare the numba rasterizer kernel against the pure-numpy fallback.

Usage:
    python benchmarks/bench_rasterize.py [--points N] [--jobs J] [--repeats R]

Equivalent end-to-end timing is available as `thma bench --compare`. Set
THMA_PURE_NUMPY=1 to run the whole package on the fallback path.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from thma import _kernels
from thma.benchmark import make_bench_cloud
from thma.pointcloud import GridIndex
from thma.raster import plan_tiles, rasterize, rasterize_tiles


def time_kernel(args_tuple, force_numpy: bool, repeats: int) -> list[float]:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        _kernels.aggregate(*args_tuple, force_numpy=force_numpy)
        times.append(time.perf_counter() - t0)
    return times


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=5_000_000)
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    cloud, traj = make_bench_cloud(args.points)
    frames = plan_tiles(traj)
    f = frames[0]
    kernel_args = (cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.intensity.astype(np.float64),
                   cloud.xyz[:, 2], f.center_x, f.center_y, f.heading, f.resolution, f.size)

    print(f"cloud: {args.points:,} points, {len(frames)} frames of {f.size} px @ {f.resolution} m")

    if _kernels.NUMBA_ENABLED:
        _kernels.aggregate(*kernel_args[:2], kernel_args[2][:10], kernel_args[3][:10],
                           *kernel_args[4:])  # warm up the JIT on a tiny slice
        numba_times = time_kernel(kernel_args, force_numpy=False, repeats=args.repeats)
        print(f"kernel numba : median {statistics.median(numba_times):.3f} s  {numba_times}")
    else:
        numba_times = None
        print("kernel numba : unavailable (numba not importable or THMA_PURE_NUMPY set)")

    numpy_times = time_kernel(kernel_args, force_numpy=True, repeats=args.repeats)
    print(f"kernel numpy : median {statistics.median(numpy_times):.3f} s  {numpy_times}")
    if numba_times:
        speedup = statistics.median(numpy_times) / statistics.median(numba_times)
        print(f"kernel speedup (numpy / numba): {speedup:.1f}x")

    # verify both paths agree bit for bit before trusting the timings
    if _kernels.NUMBA_ENABLED:
        a = _kernels.aggregate(*kernel_args, force_numpy=False)
        b = _kernels.aggregate(*kernel_args, force_numpy=True)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "kernel paths diverge"
        print("kernel outputs: bit-identical across paths")

    rasterize(make_bench_cloud(1000)[0], f)  # warmup
    t0 = time.perf_counter()
    index = GridIndex.build(cloud)
    rasterize_tiles(cloud, frames, jobs=args.jobs, index=index)
    print(f"tile set end-to-end ({args.jobs} jobs): {time.perf_counter() - t0:.3f} s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
