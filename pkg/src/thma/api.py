"""HTTP JSON API over a review store, consumed by the review console and scripts.

Overlay geometry is converted to tile pixel coordinates server side so the
client never does geodesy; points are emitted as [x, y] = [col, row] in image
space, matching canvas drawing conventions.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pathlib import Path

import numpy as np

from .descriptor import (
    DescriptorVector,
    ObjectClass,
    POLYLINE_CLASSES,
    detection_from_json,
    sign_corners,
)
from .errors import AlreadyDecided, MalformedDecision, NotFound, ThmaError
from .loop import ReviewStatus, ReviewStore, review_item_to_json
from .raster import TileFrame, pixel_to_planar, planar_to_pixel, read_tile_frame


def px_to_planar_affine(frame: TileFrame) -> dict:
    """The affine map from pixel (x=col, y=row) to planar meters.

    planar(x, y) = origin + x * dx + y * dy. Shipping this with the item
    detail lets the review console turn dragged vertices back into detection
    geometry by pure arithmetic, keeping all projection math server side.
    """
    ox, oy = pixel_to_planar(frame, 0.0, 0.0)
    dxx, dxy = pixel_to_planar(frame, 0.0, 1.0)   # +1 column
    dyx, dyy = pixel_to_planar(frame, 1.0, 0.0)   # +1 row
    return {
        "origin": [float(ox), float(oy)],
        "dx": [float(dxx - ox), float(dxy - oy)],
        "dy": [float(dyx - ox), float(dyy - oy)],
    }


def overlay_geometry(vec: DescriptorVector, frame: TileFrame) -> dict:
    """Project one descriptor vector into tile pixel space for drawing."""

    def px(points: np.ndarray) -> list[list[float]]:
        rows, cols = planar_to_pixel(frame, points[:, 0], points[:, 1])
        return [[float(c), float(r)] for r, c in zip(np.atleast_1d(rows), np.atleast_1d(cols))]

    cls = vec.object_class
    if cls in POLYLINE_CLASSES:
        return {"kind": "polyline", "closed": False, "points_px": px(vec.polyline())}
    if cls == ObjectClass.TRAFFIC_SIGN:
        return {"kind": "polyline", "closed": True, "points_px": px(sign_corners(vec))}
    if cls == ObjectClass.POLE:
        pts = np.stack([vec.pole_apex, vec.pole_bottom])
    elif cls == ObjectClass.TRAFFIC_CONE:
        pts = np.stack([vec.cone_vertex, vec.cone_base_center])
    elif cls == ObjectClass.TUNNEL:
        pts = np.stack([vec.tunnel_entry, vec.tunnel_exit])
    else:  # traffic light: center plus axis endpoint
        pts = np.stack([vec.light_center, vec.light_center + vec.light_axis])
    return {"kind": "keypoints", "closed": False, "points_px": px(pts)}


def create_app(store: ReviewStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="thma review API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/api/queue")
    def get_queue(status: str = "pending", limit: int = Query(default=50, ge=1, le=1000)):
        if status == "all":
            items = store.items(limit=limit)
        else:
            try:
                items = store.items(ReviewStatus(status), limit=limit)
            except ValueError:
                raise HTTPException(status_code=400, detail=f"unknown status {status!r}")
        return {"items": [review_item_to_json(i) for i in items]}

    @app.get("/api/item/{item_id}")
    def get_item(item_id: str):
        try:
            item = store.get_item(item_id)
        except NotFound as e:
            raise HTTPException(status_code=404, detail=str(e))
        payload = review_item_to_json(item)
        payload["tile"] = None
        tile_id = item.detection.tile_id
        if tile_id is not None:
            base = store.tile_frame_base(tile_id)
            if base is not None:
                frame = read_tile_frame(base)
                payload["tile"] = {
                    "id": tile_id,
                    "url": f"/api/tile/{tile_id}.png",
                    "size": frame.size,
                    "resolution": frame.resolution,
                    "overlay": overlay_geometry(item.detection.primary_vector(), frame),
                    "px_to_planar": px_to_planar_affine(frame),
                }
        return payload

    @app.post("/api/item/{item_id}/decision")
    def post_decision(item_id: str, body: dict):
        decision = body.get("decision")
        relabel = None
        if body.get("relabel") is not None:
            try:
                relabel = detection_from_json(body["relabel"])
            except (KeyError, ValueError, TypeError, ThmaError) as e:
                raise HTTPException(status_code=400, detail=f"bad relabel payload: {e}")
        try:
            item = store.apply_decision(
                item_id, decision, relabel=relabel, reviewer=body.get("reviewer")
            )
        except MalformedDecision as e:
            raise HTTPException(status_code=400, detail=str(e))
        except NotFound as e:
            raise HTTPException(status_code=404, detail=str(e))
        except AlreadyDecided as e:
            raise HTTPException(status_code=409, detail=str(e))
        return review_item_to_json(item)

    @app.get("/api/metrics")
    def get_metrics(window: float = Query(default=3600.0, gt=0)):
        return store.metrics(window_s=window).to_json_dict()

    @app.get("/api/tile/{tile_id}.png")
    def get_tile(tile_id: str):
        path = store.tile_path(tile_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"no tile {tile_id!r}")
        return FileResponse(path, media_type="image/png")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
