"""2.5D BEV tile planning, rasterization and tile file I/O.

A tile is a size x size x 3 8-bit raster: channel 0 reflection intensity,
channel 1 highest elevation, channel 2 lowest elevation, plus an occupancy
mask. Tiles are rotated so the direction of travel points up (toward row 0).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import _kernels
from .errors import FrameMismatch, MalformedTileFile
from .pointcloud import (
    DEFAULT_SENSOR_HEIGHT_M,
    Frame,
    GridIndex,
    PointCloud,
    Trajectory,
)

DEFAULT_RESOLUTION_M = 0.05
DEFAULT_TILE_SIZE_PX = 1024
DEFAULT_Z_SPAN_M = 8.0
DEFAULT_INTENSITY_MAX_RAW = 65535


@dataclass(frozen=True)
class TileFrame:
    """Georeferencing of one tile: center, travel heading, scale and z window."""

    center_x: float
    center_y: float
    heading: float
    resolution: float = DEFAULT_RESOLUTION_M
    size: int = DEFAULT_TILE_SIZE_PX
    ground_ref_z: float = 0.0
    z_span: float = DEFAULT_Z_SPAN_M

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.size <= 0:
            raise ValueError("size must be > 0")
        if self.z_span <= 0:
            raise ValueError("z_span must be > 0")

    @property
    def footprint_m(self) -> float:
        return self.size * self.resolution

    def to_json_dict(self) -> dict:
        return {
            "center": [self.center_x, self.center_y],
            "heading": self.heading,
            "resolution": self.resolution,
            "size": self.size,
            "ground_ref_z": self.ground_ref_z,
            "z_span": self.z_span,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TileFrame":
        try:
            return cls(
                center_x=float(d["center"][0]),
                center_y=float(d["center"][1]),
                heading=float(d["heading"]),
                resolution=float(d["resolution"]),
                size=int(d["size"]),
                ground_ref_z=float(d["ground_ref_z"]),
                z_span=float(d["z_span"]),
            )
        except (KeyError, TypeError, IndexError) as e:
            raise MalformedTileFile(f"bad tile sidecar: {e}") from e


@dataclass(frozen=True)
class BevTile:
    frame: TileFrame
    channels: np.ndarray   # (size, size, 3) uint8
    occupancy: np.ndarray  # (size, size) bool

    def __post_init__(self):
        s = self.frame.size
        if self.channels.shape != (s, s, 3) or self.channels.dtype != np.uint8:
            raise ValueError("channels must be (size, size, 3) uint8")
        if self.occupancy.shape != (s, s) or self.occupancy.dtype != np.bool_:
            raise ValueError("occupancy must be (size, size) bool")


# ---------------------------------------------------------------------------
# pixel <-> planar mapping
#
# Continuous image coordinates: a point with along-travel offset u and
# left-of-travel offset v from the tile center maps to
#   row = size/2 - u/res,  col = size/2 - v/res
# so travel points toward row 0 and the vehicle's right is toward higher
# columns. A pixel (r, c) covers continuous [r, r+1) x [c, c+1).
# ---------------------------------------------------------------------------

def planar_to_pixel(frame: TileFrame, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Planar meters -> continuous (row, col) image coordinates."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cos_h, sin_h = math.cos(frame.heading), math.sin(frame.heading)
    dx, dy = x - frame.center_x, y - frame.center_y
    u = dx * cos_h + dy * sin_h
    v = -dx * sin_h + dy * cos_h
    half = frame.size / 2.0
    return half - u / frame.resolution, half - v / frame.resolution


def pixel_to_planar(frame: TileFrame, row, col) -> tuple[np.ndarray, np.ndarray]:
    """Continuous (row, col) image coordinates -> planar meters (inverse of above)."""
    row = np.asarray(row, dtype=np.float64)
    col = np.asarray(col, dtype=np.float64)
    half = frame.size / 2.0
    u = (half - row) * frame.resolution
    v = (half - col) * frame.resolution
    cos_h, sin_h = math.cos(frame.heading), math.sin(frame.heading)
    x = frame.center_x + u * cos_h - v * sin_h
    y = frame.center_y + u * sin_h + v * cos_h
    return x, y


# ---------------------------------------------------------------------------
# tile planning
# ---------------------------------------------------------------------------

def plan_tiles(
    traj: Trajectory,
    resolution: float = DEFAULT_RESOLUTION_M,
    size: int = DEFAULT_TILE_SIZE_PX,
    overlap: float = 0.0,
    z_span: float = DEFAULT_Z_SPAN_M,
    sensor_height: float = DEFAULT_SENSOR_HEIGHT_M,
) -> list[TileFrame]:
    """Place tile frames along the trajectory.

    Centers sit at arc lengths (k + 1/2) * spacing with
    spacing = size * resolution * (1 - overlap), covering the whole track with
    ceil(length / spacing) frames; each frame's heading is the local travel
    direction and ground_ref_z comes from the nearest pose minus sensor_height.
    """
    if resolution <= 0 or size <= 0:
        raise ValueError("resolution and size must be positive")
    if not 0.0 <= overlap <= 0.9:
        raise ValueError("overlap must be in [0, 0.9]")
    poses = traj.poses
    if len(poses) == 1:
        p = poses[0]
        return [TileFrame(p.x, p.y, p.heading, resolution, size, p.z - sensor_height, z_span)]

    xy = traj.xy()
    zs = traj.z()
    arcs = traj.arc_lengths()
    total = float(arcs[-1])
    spacing = size * resolution * (1.0 - overlap)
    if total <= 0.0:
        # all poses at one position: fall back to the first pose's heading
        p = poses[0]
        return [TileFrame(p.x, p.y, p.heading, resolution, size, p.z - sensor_height, z_span)]
    n = max(1, math.ceil(total / spacing - 1e-9))

    frames = []
    for k in range(n):
        s = min((k + 0.5) * spacing, total)
        i = int(np.searchsorted(arcs, s, side="right") - 1)
        i = min(max(i, 0), len(poses) - 2)
        seg = arcs[i + 1] - arcs[i]
        t = 0.0 if seg <= 0 else (s - arcs[i]) / seg
        cx, cy = xy[i] + t * (xy[i + 1] - xy[i])
        dx, dy = xy[i + 1] - xy[i]
        heading = math.atan2(dy, dx) if (dx or dy) else poses[i].heading
        near = i if (s - arcs[i]) <= (arcs[i + 1] - s) else i + 1
        frames.append(
            TileFrame(float(cx), float(cy), heading, resolution, size,
                      float(zs[near]) - sensor_height, z_span)
        )
    return frames


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

def _quantize(t: np.ndarray) -> np.ndarray:
    """Round-half-up quantization of a clamped [0, 1] value onto 0..255."""
    return np.floor(np.clip(t, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def rasterize(
    cloud: PointCloud,
    frame: TileFrame,
    intensity_max_raw: int = DEFAULT_INTENSITY_MAX_RAW,
    index: GridIndex | None = None,
) -> BevTile:
    """Project a planar cloud into one tile.

    Per occupied pixel: channel 0 is the max raw intensity, channel 1 the max z
    and channel 2 the min z, each quantized after aggregation. Points outside
    the footprint are ignored; an empty cloud yields an all-zero tile.
    """
    if cloud.frame != Frame.PLANAR:
        raise FrameMismatch("rasterize requires a planar cloud")

    x = cloud.xyz[:, 0]
    y = cloud.xyz[:, 1]
    z = cloud.xyz[:, 2]
    inten = cloud.intensity.astype(np.float64)
    if index is not None:
        r = frame.footprint_m * math.sqrt(2.0) / 2.0
        sel = index.query_bbox(frame.center_x - r, frame.center_x + r,
                               frame.center_y - r, frame.center_y + r)
        x, y, z, inten = x[sel], y[sel], z[sel], inten[sel]

    imax, zmax, zmin, occ = _kernels.aggregate(
        x, y, inten, z, frame.center_x, frame.center_y, frame.heading,
        frame.resolution, frame.size,
    )

    channels = np.zeros((frame.size, frame.size, 3), dtype=np.uint8)
    if occ.any():
        z_lo = frame.ground_ref_z - frame.z_span / 2.0
        c0 = _quantize(imax / float(intensity_max_raw))
        c1 = _quantize((zmax - z_lo) / frame.z_span)
        c2 = _quantize((zmin - z_lo) / frame.z_span)
        channels[..., 0] = np.where(occ, c0, 0)
        channels[..., 1] = np.where(occ, c1, 0)
        channels[..., 2] = np.where(occ, c2, 0)
    return BevTile(frame=frame, channels=channels, occupancy=occ)


def rasterize_tiles(
    cloud: PointCloud,
    frames: list[TileFrame],
    intensity_max_raw: int = DEFAULT_INTENSITY_MAX_RAW,
    jobs: int = 1,
    index: GridIndex | None = None,
) -> list[BevTile]:
    """Rasterize many frames against one read-only cloud, optionally in parallel."""
    if index is None and len(frames) > 1 and len(cloud) > 100_000:
        index = GridIndex.build(cloud)
    if jobs <= 1 or len(frames) <= 1:
        return [rasterize(cloud, f, intensity_max_raw, index) for f in frames]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda f: rasterize(cloud, f, intensity_max_raw, index), frames))


# ---------------------------------------------------------------------------
# tile file I/O: <base>.png + <base>.occ.png + <base>.json sidecar
# ---------------------------------------------------------------------------

def write_tile(tile: BevTile, base: str | Path) -> None:
    base = Path(base)
    Image.fromarray(tile.channels, mode="RGB").save(base.with_suffix(".png"))
    Image.fromarray(tile.occupancy).save(_occ_path(base))
    base.with_suffix(".json").write_text(json.dumps(tile.frame.to_json_dict()), encoding="utf-8")


def read_tile(base: str | Path) -> BevTile:
    base = Path(base)
    png = base.with_suffix(".png")
    occ_png = _occ_path(base)
    sidecar = base.with_suffix(".json")
    for p in (png, occ_png, sidecar):
        if not p.exists():
            raise MalformedTileFile(f"missing tile file {p}")
    try:
        channels = np.asarray(Image.open(png).convert("RGB"), dtype=np.uint8)
        occupancy = np.asarray(Image.open(occ_png).convert("1"), dtype=bool)
        frame = TileFrame.from_json_dict(json.loads(sidecar.read_text(encoding="utf-8")))
    except (OSError, UnidentifiedImageError, json.JSONDecodeError, ValueError) as e:
        raise MalformedTileFile(f"cannot read tile {base}: {e}") from e
    try:
        return BevTile(frame=frame, channels=channels, occupancy=occupancy)
    except ValueError as e:
        raise MalformedTileFile(f"inconsistent tile {base}: {e}") from e


def read_tile_frame(base: str | Path) -> TileFrame:
    """Read only the georeferencing sidecar."""
    sidecar = Path(base).with_suffix(".json")
    if not sidecar.exists():
        raise MalformedTileFile(f"missing tile sidecar {sidecar}")
    try:
        return TileFrame.from_json_dict(json.loads(sidecar.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise MalformedTileFile(f"bad tile sidecar {sidecar}: {e}") from e


def _occ_path(base: Path) -> Path:
    return base.with_name(base.stem + ".occ.png")
