"""Heuristic baseline detectors producing confidence-scored detections.

These stand in for the trained models so the refinement and routing stages
run end to end at desk scale. Confidence formulas are simple monotone
surrogates, documented as non-physical and tunable.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .descriptor import Detection, ObjectClass, Source, pole_vector, polyline_vector
from .errors import FrameMismatch
from .pointcloud import Frame, PointCloud
from .raster import BevTile, pixel_to_planar

DEFAULT_INTENSITY_THRESHOLD = 100
DEFAULT_CELL_M = 1.0
DEFAULT_MIN_HEIGHT_M = 3.0
MIN_COMPONENT_PX = 8
VERTEX_STRIDE_PX = 40


def detect_lane_markings(
    tile: BevTile,
    intensity_threshold: int = DEFAULT_INTENSITY_THRESHOLD,
    tile_id: str = "tile",
    min_component_px: int = MIN_COMPONENT_PX,
    vertex_stride_px: int = VERTEX_STRIDE_PX,
) -> list[Detection]:
    """Trace bright components of the intensity channel into polyline detections.

    The channel is thresholded (strict >), 8-connected components are
    extracted and each is traced by per-row or per-column centroids along its
    longer image axis; confidence is the component's mean normalized intensity.
    """
    mask = tile.channels[:, :, 0] > intensity_threshold
    if not mask.any():
        return []
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    dets: list[Detection] = []
    for comp in range(1, n + 1):
        rows, cols = np.nonzero(labels == comp)
        if len(rows) < min_component_px:
            continue
        row_extent = rows.max() - rows.min()
        col_extent = cols.max() - cols.min()
        if row_extent >= col_extent:
            axis_vals, trace_from, trace_of = rows, rows, cols
        else:
            axis_vals, trace_from, trace_of = cols, cols, rows
        uniq = np.unique(axis_vals)
        uniq = uniq[::max(1, vertex_stride_px)]
        if uniq[-1] != axis_vals.max():
            uniq = np.append(uniq, axis_vals.max())
        if len(uniq) < 2:
            continue
        verts_px = []
        for a in uniq:
            sel = trace_from == a
            centroid = trace_of[sel].mean()
            rc = (a + 0.5, centroid + 0.5) if row_extent >= col_extent else (centroid + 0.5, a + 0.5)
            verts_px.append(rc)
        r = np.array([p[0] for p in verts_px])
        c = np.array([p[1] for p in verts_px])
        x, y = pixel_to_planar(tile.frame, r, c)
        verts = np.column_stack([x, y, np.full_like(x, tile.frame.ground_ref_z)])
        confidence = float(tile.channels[:, :, 0][rows, cols].mean() / 255.0)
        dets.append(Detection(
            id=f"lane-{tile_id}-{comp}",
            descriptor=polyline_vector(ObjectClass.LANE_MARKING, verts),
            confidence=min(1.0, confidence),
            source=Source.MODEL,
            tile_id=tile_id,
        ))
    return dets


def detect_poles(
    cloud: PointCloud,
    cell_m: float = DEFAULT_CELL_M,
    min_height_m: float = DEFAULT_MIN_HEIGHT_M,
) -> list[Detection]:
    """Grid-cluster the cloud in xy; tall, tight cells become pole detections.

    A cell yields a pole when its z extent reaches min_height and its xy
    spread stays within half a cell; bottom/apex are the cell's lowest and
    highest points and confidence is min(1, z_extent / (2 * min_height)).
    """
    if cloud.frame != Frame.PLANAR:
        raise FrameMismatch("detect_poles requires a planar cloud")
    if len(cloud) == 0:
        return []
    x, y, z = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    ix = np.floor(x / cell_m).astype(np.int64)
    iy = np.floor(y / cell_m).astype(np.int64)
    key = (ix - ix.min()) * (iy.max() - iy.min() + 1) + (iy - iy.min())
    order = np.argsort(key, kind="stable")
    sorted_key = key[order]
    boundaries = np.nonzero(np.diff(sorted_key))[0] + 1
    groups = np.split(order, boundaries)

    dets: list[Detection] = []
    for gi in groups:
        gz = z[gi]
        z_extent = float(gz.max() - gz.min())
        if z_extent < min_height_m:
            continue
        gx, gy = x[gi], y[gi]
        spread = max(float(gx.max() - gx.min()), float(gy.max() - gy.min()))
        if spread > cell_m / 2.0:
            continue
        lo = gi[int(np.argmin(gz))]
        hi = gi[int(np.argmax(gz))]
        dets.append(Detection(
            id=f"pole-{ix[gi[0]]}-{iy[gi[0]]}",
            descriptor=pole_vector(cloud.xyz[hi], cloud.xyz[lo]),
            confidence=min(1.0, z_extent / (2.0 * min_height_m)),
            source=Source.MODEL,
        ))
    return dets
