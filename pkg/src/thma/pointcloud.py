"""Point-cloud and trajectory data model, file I/O, Mercator conversion, elevation filter.

Clouds are stored struct-of-arrays (float64 coordinates, uint16 raw intensity)
and are immutable after construction; the arrays are marked read-only so they
can be shared freely across parallel workers.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateTrajectory,
    EmptyCloud,
    FrameMismatch,
    HeaderMismatch,
    MalformedRecord,
    OutOfMercatorBand,
)

MERCATOR_RADIUS_M = 6378137.0
MERCATOR_MAX_LAT_DEG = 85.06
DEFAULT_SENSOR_HEIGHT_M = 2.0

BINARY_MAGIC = b"THPC"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIBQ")
_RECORD_DTYPE = np.dtype(
    [("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("intensity", "<u2"), ("pad", "<u2"), ("time", "<f8")]
)


class Frame(str, Enum):
    GEOGRAPHIC = "geographic"
    PLANAR = "planar"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Point3:
    """A single point; x/y are lon/lat degrees in the geographic frame, meters in planar."""

    x: float
    y: float
    z: float
    intensity: int = 0
    time: float | None = None


def _normalize_heading(h: float) -> float:
    """Wrap to [-pi, pi)."""
    h = math.fmod(h + math.pi, 2.0 * math.pi)
    if h < 0:
        h += 2.0 * math.pi
    return h - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    heading: float
    time: float

    def __post_init__(self):
        object.__setattr__(self, "heading", _normalize_heading(float(self.heading)))


@dataclass(frozen=True)
class Trajectory:
    poses: tuple[Pose, ...]
    frame: Frame = Frame.PLANAR

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) == 0:
            raise DegenerateTrajectory("trajectory has no poses")
        times = [p.time for p in self.poses]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("pose times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses], dtype=np.float64)

    def z(self) -> np.ndarray:
        return np.array([p.z for p in self.poses], dtype=np.float64)

    def arc_lengths(self) -> np.ndarray:
        """Cumulative along-track distance of each pose, starting at 0."""
        xy = self.xy()
        seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass(frozen=True)
class PointCloud:
    xyz: np.ndarray                 # (N, 3) float64
    intensity: np.ndarray           # (N,) uint16 raw scanner counts
    frame: Frame
    time: np.ndarray | None = None  # (N,) float64 seconds, optional

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must be (N, 3), got {xyz.shape}")
        inten = np.asarray(self.intensity, dtype=np.uint16)
        if inten.shape != (xyz.shape[0],):
            raise ValueError("intensity must be (N,)")
        t = self.time
        if t is not None:
            t = np.asarray(t, dtype=np.float64)
            if t.shape != (xyz.shape[0],):
                raise ValueError("time must be (N,)")
            object.__setattr__(self, "time", _freeze(t))
        if not np.isfinite(xyz).all():
            raise ValueError("xyz must be finite")
        if self.frame == Frame.GEOGRAPHIC and len(xyz):
            lon, lat = xyz[:, 0], xyz[:, 1]
            if lon.min() < -180.0 or lon.max() > 180.0:
                raise OutOfMercatorBand("longitude outside [-180, 180]")
            if np.abs(lat).max() >= MERCATOR_MAX_LAT_DEG:
                raise OutOfMercatorBand(
                    f"latitude outside the Web-Mercator band (+-{MERCATOR_MAX_LAT_DEG} deg)"
                )
        object.__setattr__(self, "xyz", _freeze(xyz))
        object.__setattr__(self, "intensity", _freeze(inten))

    def __len__(self) -> int:
        return self.xyz.shape[0]


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def load_point_cloud(path: str | Path, format: str, frame: Frame = Frame.GEOGRAPHIC) -> PointCloud:
    """Load a cloud from ``binary-v1`` (frame flag in header) or ``csv`` (frame from arg)."""
    path = Path(path)
    if format == "binary-v1":
        return _load_binary_v1(path)
    if format == "csv":
        return _load_csv(path, frame)
    raise ValueError(f"unknown point-cloud format: {format!r}")


def _load_binary_v1(path: Path) -> PointCloud:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise MalformedRecord(f"{path}: file shorter than header", where=len(data))
    magic, version, frame_flag, count = _HEADER.unpack_from(data, 0)
    if magic != BINARY_MAGIC:
        raise MalformedRecord(f"{path}: bad magic {magic!r}", where=0)
    if version != BINARY_VERSION:
        raise MalformedRecord(f"{path}: unsupported version {version}", where=4)
    if frame_flag not in (0, 1):
        raise MalformedRecord(f"{path}: bad frame flag {frame_flag}", where=8)
    body = data[_HEADER.size:]
    if len(body) % _RECORD_DTYPE.itemsize != 0:
        raise MalformedRecord(
            f"{path}: trailing partial record", where=_HEADER.size + len(body) - len(body) % _RECORD_DTYPE.itemsize
        )
    n_records = len(body) // _RECORD_DTYPE.itemsize
    if n_records != count:
        raise HeaderMismatch(f"{path}: header count {count}, file holds {n_records} records")
    if count == 0:
        raise EmptyCloud(f"{path}: zero points")
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE)
    xyz = np.column_stack([rec["x"], rec["y"], rec["z"]])
    frame = Frame.GEOGRAPHIC if frame_flag == 0 else Frame.PLANAR
    return PointCloud(xyz=xyz, intensity=rec["intensity"].copy(), frame=frame, time=rec["time"].copy())


def save_point_cloud(cloud: PointCloud, path: str | Path) -> None:
    """Write binary-v1; round-trips bit-exactly through :func:`load_point_cloud`."""
    path = Path(path)
    rec = np.zeros(len(cloud), dtype=_RECORD_DTYPE)
    rec["x"], rec["y"], rec["z"] = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    rec["intensity"] = cloud.intensity
    rec["time"] = cloud.time if cloud.time is not None else 0.0
    flag = 0 if cloud.frame == Frame.GEOGRAPHIC else 1
    with open(path, "wb") as f:
        f.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, flag, len(cloud)))
        f.write(rec.tobytes())


def _load_csv(path: Path, frame: Frame) -> PointCloud:
    xs, ys, zs, intens, times = [], [], [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "z", "intensity", "time"]:
            raise MalformedRecord(f"{path}: expected header x,y,z,intensity,time", where=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedRecord(f"{path}: expected 5 fields, got {len(row)}", where=lineno)
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
                zs.append(float(row[2]))
                inten = int(row[3])
                times.append(float(row[4]))
            except ValueError as e:
                raise MalformedRecord(f"{path}: {e}", where=lineno) from e
            if not 0 <= inten <= 0xFFFF:
                raise MalformedRecord(f"{path}: intensity {inten} outside uint16", where=lineno)
            intens.append(inten)
    if not xs:
        raise EmptyCloud(f"{path}: zero points")
    xyz = np.column_stack([xs, ys, zs]).astype(np.float64)
    return PointCloud(xyz=xyz, intensity=np.array(intens, dtype=np.uint16), frame=frame,
                      time=np.array(times, dtype=np.float64))


def load_trajectory(path: str | Path, frame: Frame = Frame.PLANAR) -> Trajectory:
    """Load a trajectory CSV with header x,y,z,heading,time."""
    path = Path(path)
    poses = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "z", "heading", "time"]:
            raise MalformedRecord(f"{path}: expected header x,y,z,heading,time", where=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedRecord(f"{path}: expected 5 fields, got {len(row)}", where=lineno)
            try:
                poses.append(Pose(float(row[0]), float(row[1]), float(row[2]),
                                  float(row[3]), float(row[4])))
            except ValueError as e:
                raise MalformedRecord(f"{path}: {e}", where=lineno) from e
    return Trajectory(poses=tuple(poses), frame=frame)


def save_trajectory(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "z", "heading", "time"])
        for p in traj.poses:
            w.writerow([repr(p.x), repr(p.y), repr(p.z), repr(p.heading), repr(p.time)])


# ---------------------------------------------------------------------------
# Web-Mercator conversion (spherical, R = 6378137 m)
# ---------------------------------------------------------------------------

def mercator_xy(lon_deg: np.ndarray, lat_deg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward spherical Web-Mercator: x = R*lon, y = R*ln(tan(pi/4 + lat/2)).

    The y term is evaluated as atanh(sin(lat)), the algebraically identical
    form that is exact at the equator.
    """
    lat_deg = np.asarray(lat_deg, dtype=np.float64)
    lon_deg = np.asarray(lon_deg, dtype=np.float64)
    if np.abs(lat_deg).max(initial=0.0) >= MERCATOR_MAX_LAT_DEG:
        raise OutOfMercatorBand(f"latitude outside +-{MERCATOR_MAX_LAT_DEG} deg")
    lam = np.radians(lon_deg)
    phi = np.radians(lat_deg)
    x = MERCATOR_RADIUS_M * lam
    y = MERCATOR_RADIUS_M * np.arctanh(np.sin(phi))
    return x, y


def inverse_mercator(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic inverse of :func:`mercator_xy`; returns (lon_deg, lat_deg)."""
    lon = np.degrees(np.asarray(x, dtype=np.float64) / MERCATOR_RADIUS_M)
    lat = np.degrees(2.0 * np.arctan(np.exp(np.asarray(y, dtype=np.float64) / MERCATOR_RADIUS_M)) - np.pi / 2.0)
    return lon, lat


def to_mercator(cloud: PointCloud) -> PointCloud:
    """Project a geographic cloud to planar meters; z, intensity and time unchanged."""
    if cloud.frame != Frame.GEOGRAPHIC:
        raise FrameMismatch("to_mercator requires a geographic cloud")
    x, y = mercator_xy(cloud.xyz[:, 0], cloud.xyz[:, 1])
    xyz = np.column_stack([x, y, cloud.xyz[:, 2]])
    return PointCloud(xyz=xyz, intensity=cloud.intensity.copy(), frame=Frame.PLANAR,
                      time=None if cloud.time is None else cloud.time.copy())


def trajectory_to_mercator(traj: Trajectory) -> Trajectory:
    """Project pose positions; headings are preserved (the projection is conformal)."""
    if traj.frame != Frame.GEOGRAPHIC:
        raise FrameMismatch("trajectory_to_mercator requires a geographic trajectory")
    xs, ys = mercator_xy(np.array([p.x for p in traj.poses]), np.array([p.y for p in traj.poses]))
    poses = tuple(
        Pose(float(x), float(y), p.z, p.heading, p.time) for x, y, p in zip(xs, ys, traj.poses)
    )
    return Trajectory(poses=poses, frame=Frame.PLANAR)


# ---------------------------------------------------------------------------
# elevation filter
# ---------------------------------------------------------------------------

def elevation_filter(
    cloud: PointCloud,
    traj: Trajectory,
    band_below: float,
    band_above: float,
    sensor_height: float = DEFAULT_SENSOR_HEIGHT_M,
) -> PointCloud:
    """Keep points with z within [g - band_below, g + band_above] of the local ground estimate.

    The ground estimate under a point is the z of the nearest-in-xy trajectory
    pose minus ``sensor_height``. Order is preserved; passing infinite bands
    disables the filter.
    """
    if cloud.frame != Frame.PLANAR or traj.frame != Frame.PLANAR:
        raise FrameMismatch("elevation_filter requires planar cloud and trajectory")
    if band_below < 0 or band_above < 0:
        raise ValueError("bands must be non-negative")
    if math.isinf(band_below) and math.isinf(band_above):
        return cloud
    tree = cKDTree(traj.xy())
    _, idx = tree.query(cloud.xyz[:, :2], k=1)
    ground = traj.z()[idx] - sensor_height
    z = cloud.xyz[:, 2]
    mask = (z >= ground - band_below) & (z <= ground + band_above)
    return PointCloud(
        xyz=cloud.xyz[mask],
        intensity=cloud.intensity[mask],
        frame=cloud.frame,
        time=None if cloud.time is None else cloud.time[mask],
    )


# ---------------------------------------------------------------------------
# uniform grid spatial index over x, y
# ---------------------------------------------------------------------------

@dataclass
class GridIndex:
    """Uniform x/y grid over a planar cloud for fast tile-footprint queries."""

    cell_m: float
    x0: float
    y0: float
    nx: int
    ny: int
    order: np.ndarray = field(repr=False)    # point indices sorted by cell
    starts: np.ndarray = field(repr=False)   # cell -> slice start in `order`

    @classmethod
    def build(cls, cloud: PointCloud, cell_m: float = 16.0) -> "GridIndex":
        if cloud.frame != Frame.PLANAR:
            raise FrameMismatch("GridIndex requires a planar cloud")
        x, y = cloud.xyz[:, 0], cloud.xyz[:, 1]
        x0, y0 = float(x.min()), float(y.min())
        ix = np.floor((x - x0) / cell_m).astype(np.int64)
        iy = np.floor((y - y0) / cell_m).astype(np.int64)
        nx, ny = int(ix.max()) + 1, int(iy.max()) + 1
        key = ix * ny + iy
        order = np.argsort(key, kind="stable")
        counts = np.bincount(key, minlength=nx * ny)
        starts = np.concatenate([[0], np.cumsum(counts)])
        return cls(cell_m=cell_m, x0=x0, y0=y0, nx=nx, ny=ny, order=order, starts=starts)

    def query_bbox(self, xmin: float, xmax: float, ymin: float, ymax: float) -> np.ndarray:
        """Indices of points in cells overlapping the bbox (superset of exact hits)."""
        ix0 = max(0, int(math.floor((xmin - self.x0) / self.cell_m)))
        ix1 = min(self.nx - 1, int(math.floor((xmax - self.x0) / self.cell_m)))
        iy0 = max(0, int(math.floor((ymin - self.y0) / self.cell_m)))
        iy1 = min(self.ny - 1, int(math.floor((ymax - self.y0) / self.cell_m)))
        if ix1 < ix0 or iy1 < iy0:
            return np.empty(0, dtype=np.int64)
        chunks = []
        for ix in range(ix0, ix1 + 1):
            a = self.starts[ix * self.ny + iy0]
            b = self.starts[ix * self.ny + iy1 + 1]
            if b > a:
                chunks.append(self.order[a:b])
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)
