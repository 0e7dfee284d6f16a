"""Rasterizer throughput benchmark, also exposed as `thma bench`.

Times the full tile-set rasterization of a synthetic cloud and, with
``compare=True``, the numba kernel against the pure-numpy fallback on one
frame. JIT compilation is warmed up on a small cloud before timing.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels
from .pointcloud import Frame, GridIndex, PointCloud, Pose, Trajectory
from .raster import plan_tiles, rasterize, rasterize_tiles


def make_bench_cloud(n_points: int, road_length_m: float = 200.0,
                     width_m: float = 40.0, seed: int = 7) -> tuple[PointCloud, Trajectory]:
    rng = np.random.default_rng(seed)
    xyz = np.column_stack([
        rng.uniform(0.0, road_length_m, n_points),
        rng.uniform(-width_m / 2.0, width_m / 2.0, n_points),
        rng.uniform(0.0, 1.0, n_points),
    ])
    inten = rng.integers(0, 65536, n_points, dtype=np.uint16)
    cloud = PointCloud(xyz=xyz, intensity=inten, frame=Frame.PLANAR)
    poses = tuple(Pose(float(x), 0.0, 2.0, 0.0, float(x)) for x in
                  np.arange(0.0, road_length_m + 1e-9, 10.0))
    return cloud, Trajectory(poses=poses, frame=Frame.PLANAR)


def run_benchmark(n_points: int = 5_000_000, jobs: int = 4, compare: bool = False) -> dict:
    cloud, traj = make_bench_cloud(n_points)
    frames = plan_tiles(traj)

    # warm up the JIT outside the timed section
    warm_cloud, _ = make_bench_cloud(1000)
    rasterize(warm_cloud, frames[0])

    t0 = time.perf_counter()
    index = GridIndex.build(cloud)
    tiles = rasterize_tiles(cloud, frames, jobs=jobs, index=index)
    elapsed = time.perf_counter() - t0

    result = {
        "n_points": n_points,
        "tiles": len(tiles),
        "jobs": jobs,
        "seconds": round(elapsed, 3),
        "points_per_second": round(n_points / elapsed),
        "numba_enabled": _kernels.NUMBA_ENABLED,
    }

    if compare:
        f = frames[0]
        x, y = cloud.xyz[:, 0], cloud.xyz[:, 1]
        z = cloud.xyz[:, 2]
        inten = cloud.intensity.astype(np.float64)
        timings = {}
        for label, force_numpy in (("numba", False), ("numpy", True)):
            if label == "numba" and not _kernels.NUMBA_ENABLED:
                continue
            t0 = time.perf_counter()
            _kernels.aggregate(x, y, inten, z, f.center_x, f.center_y, f.heading,
                               f.resolution, f.size, force_numpy=force_numpy)
            timings[label] = round(time.perf_counter() - t0, 3)
        result["kernel_seconds"] = timings
    return result
