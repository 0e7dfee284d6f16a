from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from thma.pointcloud import Frame, PointCloud, Pose, Trajectory


def random_cloud(rng: np.random.Generator, n: int, extent: float = 20.0,
                 z_range: tuple[float, float] = (-2.0, 6.0)) -> PointCloud:
    xyz = np.column_stack([
        rng.uniform(-extent, extent, n),
        rng.uniform(-extent, extent, n),
        rng.uniform(*z_range, n),
    ])
    inten = rng.integers(0, 65536, n, dtype=np.uint16)
    return PointCloud(xyz=xyz, intensity=inten, frame=Frame.PLANAR)


def straight_trajectory(length_m: float = 200.0, spacing_m: float = 5.0,
                        z: float = 2.0, heading: float = 0.0) -> Trajectory:
    xs = np.arange(0.0, length_m + 1e-9, spacing_m)
    if xs[-1] < length_m:
        xs = np.append(xs, length_m)
    poses = tuple(Pose(float(x), 0.0, z, heading, float(i)) for i, x in enumerate(xs))
    return Trajectory(poses=poses, frame=Frame.PLANAR)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
