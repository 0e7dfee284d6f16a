"""Deterministic synthetic road scenes with ground truth, for desk-scale runs.

A scene is a straight road along +x: a ground point grid, lane-marking lines
painted as high-intensity point rows, vertical pole columns on the roadside,
a centerline trajectory, and a ground-truth label set consistent with the
generated geometry by construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .descriptor import (
    Detection,
    ObjectClass,
    Source,
    pole_vector,
    polyline_vector,
)
from .distill import LabelSet, label_set_from_file, label_set_to_file
from .errors import InvalidConfig
from .pointcloud import (
    Frame,
    PointCloud,
    Pose,
    Trajectory,
    load_point_cloud,
    load_trajectory,
    save_point_cloud,
    save_trajectory,
)


@dataclass(frozen=True)
class SceneConfig:
    road_length_m: float = 200.0
    lane_count: int = 2
    lane_width_m: float = 3.5
    pole_spacing_m: float = 50.0
    pole_height_m: float = 6.0
    noise_sigma_m: float = 0.0
    dropout: float = 0.0
    seed: int = 42

    ground_spacing_m: float = 0.15
    marking_spacing_m: float = 0.04
    shoulder_m: float = 2.0
    pole_offset_m: float = 2.5        # beyond the ground patch so pole cells stay clean
    pole_point_step_m: float = 0.05
    marking_chunk_m: float = 50.0     # gt polylines are emitted per chunk
    pose_spacing_m: float = 5.0
    speed_mps: float = 10.0
    sensor_height_m: float = 2.0

    ground_intensity: int = 8000
    marking_intensity: int = 52000
    worn_marking_intensity: int = 30000
    pole_intensity: int = 20000
    worn_first_line: bool = True

    def __post_init__(self):
        if self.road_length_m <= 0:
            raise InvalidConfig("road_length_m must be > 0")
        if self.lane_count < 1:
            raise InvalidConfig("lane_count must be >= 1")
        if self.pole_spacing_m <= 0:
            raise InvalidConfig("pole_spacing_m must be > 0")
        if self.pole_height_m <= 0:
            raise InvalidConfig("pole_height_m must be > 0")
        if self.noise_sigma_m < 0:
            raise InvalidConfig("noise_sigma_m must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must be in [0, 1)")

    @property
    def road_half_width_m(self) -> float:
        return self.lane_count * self.lane_width_m / 2.0


@dataclass(frozen=True)
class SyntheticScene:
    cloud: PointCloud
    trajectory: Trajectory
    ground_truth: LabelSet
    config: SceneConfig


def _marking_ys(cfg: SceneConfig) -> np.ndarray:
    # lane_count lanes have lane_count + 1 boundary lines
    half = cfg.road_half_width_m
    return np.linspace(-half, half, cfg.lane_count + 1)


def pole_xs(cfg: SceneConfig) -> np.ndarray:
    return np.arange(0.0, cfg.road_length_m + 1e-9, cfg.pole_spacing_m)


def generate_scene(cfg: SceneConfig) -> SyntheticScene:
    """Build the scene; identical output for identical config (seed included)."""
    rng = np.random.default_rng(cfg.seed)
    xs_parts: list[np.ndarray] = []
    inten_parts: list[np.ndarray] = []

    def add(points: np.ndarray, intensity: int) -> None:
        xs_parts.append(points)
        inten_parts.append(np.full(len(points), intensity, dtype=np.uint16))

    # ground grid
    gx = np.arange(0.0, cfg.road_length_m + 1e-9, cfg.ground_spacing_m)
    gy = np.arange(-(cfg.road_half_width_m + cfg.shoulder_m),
                   cfg.road_half_width_m + cfg.shoulder_m + 1e-9, cfg.ground_spacing_m)
    gxx, gyy = np.meshgrid(gx, gy, indexing="ij")
    ground = np.column_stack([gxx.ravel(), gyy.ravel(), np.zeros(gxx.size)])
    add(ground, cfg.ground_intensity)

    # lane-marking lines
    mx = np.arange(0.0, cfg.road_length_m + 1e-9, cfg.marking_spacing_m)
    for i, y in enumerate(_marking_ys(cfg)):
        pts = np.column_stack([mx, np.full_like(mx, y), np.zeros_like(mx)])
        worn = cfg.worn_first_line and i == 0
        add(pts, cfg.worn_marking_intensity if worn else cfg.marking_intensity)

    # pole columns on the right roadside, past the ground patch
    pole_y = cfg.road_half_width_m + cfg.shoulder_m + cfg.pole_offset_m
    pz = np.arange(0.0, cfg.pole_height_m + 1e-9, cfg.pole_point_step_m)
    for px in pole_xs(cfg):
        col = np.column_stack([np.full_like(pz, px), np.full_like(pz, pole_y), pz])
        add(col, cfg.pole_intensity)

    xyz = np.concatenate(xs_parts)
    intensity = np.concatenate(inten_parts)

    if cfg.noise_sigma_m > 0:
        xyz = xyz + rng.normal(0.0, cfg.noise_sigma_m, xyz.shape)
    if cfg.dropout > 0:
        keep = rng.random(len(xyz)) >= cfg.dropout
        xyz, intensity = xyz[keep], intensity[keep]

    cloud = PointCloud(xyz=xyz, intensity=intensity, frame=Frame.PLANAR)

    # centerline trajectory at sensor height, heading +x
    px = np.arange(0.0, cfg.road_length_m + 1e-9, cfg.pose_spacing_m)
    if px[-1] < cfg.road_length_m:
        px = np.append(px, cfg.road_length_m)
    poses = tuple(
        Pose(float(x), 0.0, cfg.sensor_height_m, 0.0, float(x) / cfg.speed_mps) for x in px
    )
    trajectory = Trajectory(poses=poses, frame=Frame.PLANAR)

    return SyntheticScene(cloud=cloud, trajectory=trajectory,
                          ground_truth=_ground_truth(cfg), config=cfg)


def _ground_truth(cfg: SceneConfig) -> LabelSet:
    items: list[Detection] = []
    for i, y in enumerate(_marking_ys(cfg)):
        x0 = 0.0
        chunk = 0
        while x0 < cfg.road_length_m - 1e-9:
            x1 = min(x0 + cfg.marking_chunk_m, cfg.road_length_m)
            xs = np.linspace(x0, x1, max(2, int((x1 - x0) / 10.0) + 1))
            verts = np.column_stack([xs, np.full_like(xs, y), np.zeros_like(xs)])
            items.append(Detection(
                id=f"gt-lane-{i}-{chunk}",
                descriptor=polyline_vector(ObjectClass.LANE_MARKING, verts),
                confidence=1.0,
                source=Source.HUMAN,
            ))
            x0 = x1
            chunk += 1
    pole_y = cfg.road_half_width_m + cfg.shoulder_m + cfg.pole_offset_m
    for j, px in enumerate(pole_xs(cfg)):
        items.append(Detection(
            id=f"gt-pole-{j}",
            descriptor=pole_vector(np.array([px, pole_y, cfg.pole_height_m]),
                                   np.array([px, pole_y, 0.0])),
            confidence=1.0,
            source=Source.HUMAN,
        ))
    return LabelSet(tuple(items))


# ---------------------------------------------------------------------------
# on-disk scene bundle
# ---------------------------------------------------------------------------

def save_scene(scene: SyntheticScene, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_point_cloud(scene.cloud, out / "points.thpc")
    save_trajectory(scene.trajectory, out / "traj.csv")
    label_set_to_file(scene.ground_truth, out / "gt.json")
    (out / "scene_config.json").write_text(json.dumps(asdict(scene.config), indent=2),
                                           encoding="utf-8")


def load_scene(scene_dir: str | Path) -> SyntheticScene:
    d = Path(scene_dir)
    cfg = SceneConfig(**json.loads((d / "scene_config.json").read_text(encoding="utf-8")))
    return SyntheticScene(
        cloud=load_point_cloud(d / "points.thpc", "binary-v1"),
        trajectory=load_trajectory(d / "traj.csv", frame=Frame.PLANAR),
        ground_truth=label_set_from_file(d / "gt.json"),
        config=cfg,
    )
