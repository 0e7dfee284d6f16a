from __future__ import annotations

import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thma.errors import (
    DegenerateTrajectory,
    EmptyCloud,
    FrameMismatch,
    HeaderMismatch,
    MalformedRecord,
    OutOfMercatorBand,
)
from thma.pointcloud import (
    Frame,
    GridIndex,
    PointCloud,
    Pose,
    Trajectory,
    elevation_filter,
    inverse_mercator,
    load_point_cloud,
    load_trajectory,
    mercator_xy,
    save_point_cloud,
    to_mercator,
)

from conftest import random_cloud, straight_trajectory


def _geo_cloud(rows):
    xyz = np.array([[r[0], r[1], r[2]] for r in rows], dtype=np.float64)
    inten = np.array([r[3] for r in rows], dtype=np.uint16)
    return PointCloud(xyz=xyz, intensity=inten, frame=Frame.GEOGRAPHIC)


# --- binary-v1 and CSV I/O -------------------------------------------------

def test_binary_v1_round_trip_is_bit_exact(tmp_path, rng):
    cloud = random_cloud(rng, 257)
    path = tmp_path / "c.thpc"
    save_point_cloud(cloud, path)
    back = load_point_cloud(path, "binary-v1")
    assert back.frame == cloud.frame
    assert back.xyz.tobytes() == cloud.xyz.tobytes()
    assert np.array_equal(back.intensity, cloud.intensity)


def test_binary_v1_header_count_matches(tmp_path, rng):
    # header count 3 with 3 records parses exactly
    cloud = random_cloud(rng, 3)
    path = tmp_path / "c.thpc"
    save_point_cloud(cloud, path)
    assert len(load_point_cloud(path, "binary-v1")) == 3


def test_binary_v1_header_mismatch(tmp_path, rng):
    cloud = random_cloud(rng, 10)
    path = tmp_path / "c.thpc"
    save_point_cloud(cloud, path)
    data = path.read_bytes()
    truncated = data[:-36]  # drop one 36-byte record; header still says 10
    path.write_bytes(truncated)
    with pytest.raises(HeaderMismatch):
        load_point_cloud(path, "binary-v1")


def test_binary_v1_bad_magic(tmp_path, rng):
    path = tmp_path / "c.thpc"
    save_point_cloud(random_cloud(rng, 2), path)
    data = bytearray(path.read_bytes())
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(MalformedRecord):
        load_point_cloud(path, "binary-v1")


def test_binary_v1_empty_is_error(tmp_path):
    path = tmp_path / "c.thpc"
    path.write_bytes(struct.pack("<4sIBQ", b"THPC", 1, 1, 0))
    with pytest.raises(EmptyCloud):
        load_point_cloud(path, "binary-v1")


def test_csv_row_maps_fields_directly(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("x,y,z,intensity,time\n116.40,39.90,45.2,180,0.0\n")
    cloud = load_point_cloud(path, "csv")
    assert cloud.frame == Frame.GEOGRAPHIC
    assert cloud.xyz[0].tolist() == [116.40, 39.90, 45.2]
    assert cloud.intensity[0] == 180
    assert cloud.time[0] == 0.0


def test_csv_malformed_row_reports_line(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("x,y,z,intensity,time\n1,2,3,4,5\n1,2,oops,4,5\n")
    with pytest.raises(MalformedRecord) as ei:
        load_point_cloud(path, "csv", frame=Frame.PLANAR)
    assert ei.value.where == 3


def test_trajectory_csv_round_trip(tmp_path):
    traj = straight_trajectory(50.0)
    from thma.pointcloud import save_trajectory

    save_trajectory(traj, tmp_path / "t.csv")
    back = load_trajectory(tmp_path / "t.csv", frame=Frame.PLANAR)
    assert back == traj


# --- Web Mercator ------------------------------------------------------------

def test_mercator_origin():
    cloud = _geo_cloud([(0.0, 0.0, 0.0, 1)])
    m = to_mercator(cloud)
    assert m.xyz[0, 0] == 0.0
    assert m.xyz[0, 1] == 0.0
    assert m.frame == Frame.PLANAR


def test_mercator_antimeridian_equator():
    # pi * R computed with a 50-digit evaluator: 20037508.342789243076...
    x, y = mercator_xy(np.array([180.0]), np.array([0.0]))
    assert abs(x[0] - 20037508.34) < 1e-2
    assert y[0] == 0.0


def test_mercator_beijing_fixture():
    # frozen from an independent 50-digit evaluation of the closed forms
    x, y = mercator_xy(np.array([116.40]), np.array([39.90]))
    assert abs(x[0] - 12957588.728337044) < 1e-6
    assert abs(y[0] - 4851421.175183358) < 1e-6


def test_mercator_preserves_z_intensity_time():
    xyz = np.array([[10.0, 20.0, 45.2]])
    cloud = PointCloud(xyz=xyz, intensity=np.array([7], dtype=np.uint16),
                       frame=Frame.GEOGRAPHIC, time=np.array([3.5]))
    m = to_mercator(cloud)
    assert m.xyz[0, 2] == 45.2
    assert m.intensity[0] == 7
    assert m.time[0] == 3.5


def test_out_of_band_latitude_rejected():
    with pytest.raises(OutOfMercatorBand):
        _geo_cloud([(0.0, 85.06, 0.0, 0)])
    with pytest.raises(OutOfMercatorBand):
        mercator_xy(np.array([0.0]), np.array([-89.0]))


def test_to_mercator_requires_geographic(rng):
    with pytest.raises(FrameMismatch):
        to_mercator(random_cloud(rng, 3))


@settings(max_examples=200, deadline=None)
@given(
    lon=st.floats(-180.0, 180.0),
    lat=st.floats(-85.0, 85.0),
)
def test_mercator_round_trip_within_1e9_degrees(lon, lat):
    x, y = mercator_xy(np.array([lon]), np.array([lat]))
    lon2, lat2 = inverse_mercator(x, y)
    assert abs(lon2[0] - lon) < 1e-9
    assert abs(lat2[0] - lat) < 1e-9


# --- elevation filter --------------------------------------------------------

def _flat_traj(z: float = 47.0) -> Trajectory:
    poses = tuple(Pose(float(x), 0.0, z, 0.0, float(x)) for x in (0.0, 10.0, 20.0))
    return Trajectory(poses=poses, frame=Frame.PLANAR)


def _planar_cloud(zs):
    xyz = np.array([[5.0, 0.0, z] for z in zs])
    return PointCloud(xyz=xyz, intensity=np.zeros(len(zs), dtype=np.uint16), frame=Frame.PLANAR)


def test_elevation_filter_keeps_band():
    # pose z 47, sensor 2 -> ground 45; band (1, 3) -> keep z in [44, 48]
    cloud = _planar_cloud([45.3])
    out = elevation_filter(cloud, _flat_traj(), 1.0, 3.0, sensor_height=2.0)
    assert len(out) == 1


def test_elevation_filter_drops_above_band():
    cloud = _planar_cloud([52.0])
    out = elevation_filter(cloud, _flat_traj(), 1.0, 3.0, sensor_height=2.0)
    assert len(out) == 0


def test_elevation_filter_infinite_band_is_identity(rng):
    cloud = random_cloud(rng, 100)
    out = elevation_filter(cloud, _flat_traj(), math.inf, math.inf)
    assert np.array_equal(out.xyz, cloud.xyz)
    assert np.array_equal(out.intensity, cloud.intensity)


def test_elevation_filter_frame_mismatch():
    cloud = _geo_cloud([(0.0, 0.0, 0.0, 0)])
    with pytest.raises(FrameMismatch):
        elevation_filter(cloud, _flat_traj(), 1.0, 3.0)


def test_elevation_filter_output_is_subsequence(rng):
    cloud = random_cloud(rng, 500, z_range=(40.0, 55.0))
    out = elevation_filter(cloud, _flat_traj(), 1.0, 3.0)
    # every kept row appears in the input in the same relative order
    positions = []
    rows = {tuple(r): i for i, r in enumerate(cloud.xyz)}
    for r in out.xyz:
        positions.append(rows[tuple(r)])
    assert positions == sorted(positions)
    assert len(set(positions)) == len(positions)


# --- types -------------------------------------------------------------------

def test_heading_normalized_to_half_open_interval():
    assert Pose(0, 0, 0, math.pi, 0.0).heading == -math.pi
    assert Pose(0, 0, 0, -math.pi, 0.0).heading == -math.pi
    assert abs(Pose(0, 0, 0, 3 * math.pi / 2, 0.0).heading - (-math.pi / 2)) < 1e-12


def test_trajectory_requires_strictly_increasing_time():
    with pytest.raises(ValueError):
        Trajectory(poses=(Pose(0, 0, 0, 0, 1.0), Pose(1, 0, 0, 0, 1.0)), frame=Frame.PLANAR)


def test_trajectory_requires_poses():
    with pytest.raises(DegenerateTrajectory):
        Trajectory(poses=(), frame=Frame.PLANAR)


def test_cloud_arrays_are_read_only(rng):
    cloud = random_cloud(rng, 4)
    with pytest.raises(ValueError):
        cloud.xyz[0, 0] = 1.0


# --- grid index --------------------------------------------------------------

def test_grid_index_query_superset_of_exact_hits(rng):
    cloud = random_cloud(rng, 2000, extent=50.0)
    idx = GridIndex.build(cloud, cell_m=10.0)
    xmin, xmax, ymin, ymax = -20.0, 5.0, -1.0, 30.0
    got = set(idx.query_bbox(xmin, xmax, ymin, ymax).tolist())
    x, y = cloud.xyz[:, 0], cloud.xyz[:, 1]
    exact = set(np.nonzero((x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax))[0].tolist())
    assert exact <= got
