"""`thma` command line: synth, rasterize, detect, refine, route, serve, export, metrics, run, bench.

`thma run` executes the batch stages in order with on-disk artifacts between
steps (scene -> tiles -> predictions -> refined labels -> review store ->
feedback) and writes a JSON run report; `thma serve` hosts the review API over
a store produced by `thma route` or `thma run`.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .descriptor import detections_from_file, detections_to_file
from .detect import (
    DEFAULT_CELL_M,
    DEFAULT_INTENSITY_THRESHOLD,
    DEFAULT_MIN_HEIGHT_M,
    detect_lane_markings,
    detect_poles,
)
from .distill import (
    LabelSet,
    MatchConfig,
    label_set_from_file,
    label_set_to_file,
    refine,
    refined_to_file,
)
from .errors import InvalidConfig, ThmaError
from .loop import ReviewStore, RouteConfig, route
from .pointcloud import (
    DEFAULT_SENSOR_HEIGHT_M,
    Frame,
    elevation_filter,
    load_point_cloud,
    load_trajectory,
    to_mercator,
    trajectory_to_mercator,
)
from .raster import (
    DEFAULT_INTENSITY_MAX_RAW,
    DEFAULT_RESOLUTION_M,
    DEFAULT_TILE_SIZE_PX,
    DEFAULT_Z_SPAN_M,
    plan_tiles,
    rasterize_tiles,
    read_tile,
    write_tile,
)
from .synth import SceneConfig, SyntheticScene, generate_scene, save_scene

DEFAULT_BAND_BELOW_M = 1.0
DEFAULT_BAND_ABOVE_M = 3.0


@dataclass
class PipelineConfig:
    """Everything `thma run` needs; loadable from JSON with CLI overrides."""

    scene: dict = field(default_factory=dict)
    resolution: float = DEFAULT_RESOLUTION_M
    size: int = DEFAULT_TILE_SIZE_PX
    overlap: float = 0.0
    z_span: float = DEFAULT_Z_SPAN_M
    intensity_max_raw: int = DEFAULT_INTENSITY_MAX_RAW
    band_below: float = DEFAULT_BAND_BELOW_M
    band_above: float = DEFAULT_BAND_ABOVE_M
    sensor_height: float = DEFAULT_SENSOR_HEIGHT_M
    intensity_threshold: int = DEFAULT_INTENSITY_THRESHOLD
    cell_m: float = DEFAULT_CELL_M
    min_height_m: float = DEFAULT_MIN_HEIGHT_M
    t_low: float = 0.3
    t_high: float = 0.8
    distance_threshold: float = 0.5
    t_auto: float = 0.7
    seed: int = 42
    jobs: int = 1

    @classmethod
    def load(cls, path: str | Path | None, seed: int | None, jobs: int | None) -> "PipelineConfig":
        data = {}
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise InvalidConfig(f"config file not found: {p}")
            data = json.loads(p.read_text(encoding="utf-8"))
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if seed is not None:
            cfg.seed = seed
        if jobs is not None:
            cfg.jobs = jobs
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("t_low", "t_high", "t_auto"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {v}")
        if self.t_low > self.t_high:
            raise InvalidConfig("t_low must be <= t_high")
        if self.resolution <= 0 or self.size <= 0:
            raise InvalidConfig("resolution and size must be positive")
        if not 0.0 <= self.overlap <= 0.9:
            raise InvalidConfig("overlap must be in [0, 0.9]")
        if self.jobs < 1:
            raise InvalidConfig("jobs must be >= 1")
        SceneConfig(**{**self.scene, "seed": self.seed})  # raises InvalidConfig on bad values

    def scene_config(self) -> SceneConfig:
        return SceneConfig(**{**self.scene, "seed": self.seed})


# ---------------------------------------------------------------------------
# stage helpers shared by subcommands and `thma run`
# ---------------------------------------------------------------------------

def _stage_rasterize(cloud, traj, cfg: PipelineConfig, out_dir: Path) -> list[str]:
    if cloud.frame == Frame.GEOGRAPHIC:
        cloud = to_mercator(cloud)
    if traj.frame == Frame.GEOGRAPHIC:
        traj = trajectory_to_mercator(traj)
    filtered = elevation_filter(cloud, traj, cfg.band_below, cfg.band_above, cfg.sensor_height)
    frames = plan_tiles(traj, cfg.resolution, cfg.size, cfg.overlap, cfg.z_span, cfg.sensor_height)
    tiles = rasterize_tiles(filtered, frames, cfg.intensity_max_raw, jobs=cfg.jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for i, tile in enumerate(tiles):
        tile_id = f"tile_{i:05d}"
        write_tile(tile, out_dir / tile_id)
        ids.append(tile_id)
    return ids


def _stage_detect(tiles_dir: Path, cloud, cfg: PipelineConfig) -> list:
    dets = []
    for sidecar in sorted(tiles_dir.glob("tile_*.json")):
        tile_id = sidecar.stem
        tile = read_tile(tiles_dir / tile_id)
        dets.extend(detect_lane_markings(tile, cfg.intensity_threshold, tile_id=tile_id))
    dets.extend(detect_poles(cloud, cfg.cell_m, cfg.min_height_m))
    return dets


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = SceneConfig(**json.loads(Path(args.config).read_text(encoding="utf-8"))) \
        if args.config else SceneConfig(seed=args.seed)
    scene = generate_scene(cfg)
    save_scene(scene, args.out)
    print(f"scene: {len(scene.cloud)} points, {len(scene.trajectory)} poses, "
          f"{len(scene.ground_truth)} gt labels -> {args.out}")
    return 0


def cmd_rasterize(args) -> int:
    fmt = "csv" if args.points.endswith(".csv") else "binary-v1"
    cloud = load_point_cloud(args.points, fmt)
    traj = load_trajectory(args.traj, frame=cloud.frame)
    cfg = PipelineConfig(resolution=args.res, size=args.size, overlap=args.overlap,
                         jobs=args.jobs, band_below=args.band_below, band_above=args.band_above,
                         sensor_height=args.sensor_height,
                         intensity_max_raw=args.intensity_max)
    ids = _stage_rasterize(cloud, traj, cfg, Path(args.out))
    print(f"wrote {len(ids)} tiles to {args.out}")
    return 0


def cmd_detect(args) -> int:
    cloud = load_point_cloud(args.cloud, "binary-v1")
    cfg = PipelineConfig(intensity_threshold=args.intensity_threshold,
                         cell_m=args.cell, min_height_m=args.min_height)
    dets = _stage_detect(Path(args.tiles), cloud, cfg)
    detections_to_file(dets, args.out)
    print(f"wrote {len(dets)} detections to {args.out}")
    return 0


def cmd_refine(args) -> int:
    gt = label_set_from_file(args.gt)
    pred = label_set_from_file(args.pred)
    cfg = MatchConfig(distance_threshold=args.dist, t_low=args.tlow, t_high=args.thigh)
    refined = refine(gt, pred, cfg)
    refined_to_file(refined, args.out)
    n_gt = sum(1 for r in refined.items if r.provenance.value == "confirmed_gt")
    print(f"refined: {len(refined)} items ({n_gt} confirmed gt, "
          f"{len(refined) - n_gt} high-confidence model) -> {args.out}")
    return 0


def cmd_route(args) -> int:
    dets = detections_from_file(args.pred)
    accepted, queue = route(dets, RouteConfig(t_auto=args.tauto))
    store = ReviewStore(args.store, tiles_dir=args.tiles)
    store.record_route(accepted, queue)
    m = store.metrics()
    ratio = "n/a" if m.automation_ratio is None else f"{m.automation_ratio:.3f}"
    print(f"routed: {len(accepted)} auto-accepted, {len(queue)} queued "
          f"(automation ratio {ratio}) -> {args.store}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    store = ReviewStore(args.store)
    app = create_app(store, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args) -> int:
    store = ReviewStore(args.store)
    feedback = store.export_feedback()
    label_set_to_file(feedback, args.out)
    print(f"exported {len(feedback)} feedback labels to {args.out}")
    return 0


def cmd_metrics(args) -> int:
    store = ReviewStore(args.store)
    print(json.dumps(store.metrics(window_s=args.window).to_json_dict(), indent=2))
    return 0


def cmd_run(args) -> int:
    try:
        cfg = PipelineConfig.load(args.config, args.seed, args.jobs)
    except (InvalidConfig, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"seed": cfg.seed, "config": asdict(cfg), "stages": {}, "counts": {}}

    def stage(name: str, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except ThmaError as e:
            print(f"stage {name} failed: {e}", file=sys.stderr)
            raise
        report["stages"][name] = {"duration_s": round(time.perf_counter() - t0, 3)}
        return result

    try:
        scene: SyntheticScene = stage("synth", lambda: generate_scene(cfg.scene_config()))
        save_scene(scene, out / "scene")
        report["counts"]["points"] = len(scene.cloud)
        report["counts"]["gt_labels"] = len(scene.ground_truth)

        tile_ids = stage("rasterize", lambda: _stage_rasterize(
            scene.cloud, scene.trajectory, cfg, out / "tiles"))
        report["counts"]["tiles"] = len(tile_ids)

        dets = stage("detect", lambda: _stage_detect(out / "tiles", scene.cloud, cfg))
        detections_to_file(dets, out / "pred.json")
        report["counts"]["detections"] = len(dets)

        refined = stage("refine", lambda: refine(
            scene.ground_truth, LabelSet(tuple(dets)),
            MatchConfig(cfg.distance_threshold, cfg.t_low, cfg.t_high)))
        refined_to_file(refined, out / "refined.json")
        report["counts"]["refined_labels"] = len(refined)

        def do_route():
            accepted, queue = route(dets, RouteConfig(t_auto=cfg.t_auto))
            store = ReviewStore(out / "store", tiles_dir=out / "tiles")
            store.record_route(accepted, queue)
            return store, accepted, queue

        store, accepted, queue = stage("route", do_route)
        report["counts"]["auto_accepted"] = len(accepted)
        report["counts"]["queued"] = len(queue)

        feedback = stage("export", store.export_feedback)
        label_set_to_file(feedback, out / "feedback.json")
        report["counts"]["feedback_labels"] = len(feedback)

        metrics = store.metrics()
        report["automation_ratio"] = metrics.automation_ratio
    except ThmaError:
        report["failed"] = True
        (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
        return 1

    (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps({"counts": report["counts"],
                      "automation_ratio": report["automation_ratio"]}, indent=2))
    return 0


def cmd_bench(args) -> int:
    from .benchmark import run_benchmark

    result = run_benchmark(n_points=args.points, jobs=args.jobs, compare=args.compare)
    print(json.dumps(result, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thma", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--config", default=None, help="scene config JSON")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("rasterize", help="BEV tiles from a cloud and trajectory")
    p.add_argument("--points", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--res", type=float, default=DEFAULT_RESOLUTION_M)
    p.add_argument("--size", type=int, default=DEFAULT_TILE_SIZE_PX)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--band-below", type=float, default=DEFAULT_BAND_BELOW_M)
    p.add_argument("--band-above", type=float, default=DEFAULT_BAND_ABOVE_M)
    p.add_argument("--sensor-height", type=float, default=DEFAULT_SENSOR_HEIGHT_M)
    p.add_argument("--intensity-max", type=int, default=DEFAULT_INTENSITY_MAX_RAW)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rasterize)

    p = sub.add_parser("detect", help="baseline lane-marking and pole detection")
    p.add_argument("--tiles", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--intensity-threshold", type=int, default=DEFAULT_INTENSITY_THRESHOLD)
    p.add_argument("--cell", type=float, default=DEFAULT_CELL_M)
    p.add_argument("--min-height", type=float, default=DEFAULT_MIN_HEIGHT_M)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("refine", help="knowledge-distillation label refinement")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--tlow", type=float, default=0.3)
    p.add_argument("--thigh", type=float, default=0.8)
    p.add_argument("--dist", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_refine)

    p = sub.add_parser("route", help="split detections into auto stream and review queue")
    p.add_argument("--pred", required=True)
    p.add_argument("--tauto", type=float, default=0.7)
    p.add_argument("--store", required=True)
    p.add_argument("--tiles", default=None, help="tile directory for review snippets")
    p.set_defaults(fn=cmd_route)

    p = sub.add_parser("serve", help="host the review API over a store")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui", default=None, help="static directory with the built review console")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("export", help="export the feedback label set")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("metrics", help="print loop metrics")
    p.add_argument("--store", required=True)
    p.add_argument("--window", type=float, default=3600.0)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("run", help="run the full batch pipeline")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", help="rasterizer throughput benchmark")
    p.add_argument("--points", type=int, default=5_000_000)
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--compare", action="store_true",
                   help="also time the pure-numpy kernel path")
    p.set_defaults(fn=cmd_bench)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ThmaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
