// Overlay geometry: hit-testing, vertex dragging and the mapping from edited
// pixel vertices back to detection JSON. All coordinates come from the API
// payload; the only client-side transform is the server-provided affine map.

import type { DetectionJson, OverlayJson, PxToPlanar } from "./types";

export const VERTEX_HIT_RADIUS_PX = 8;

const POLYLINE_CLASSES = new Set(["barrier", "curb", "lane_marking"]);
// keypoint classes whose overlay points map 1:1 onto schema xy values
const DRAGGABLE_KEYPOINT_CLASSES = new Set(["pole", "traffic_cone", "tunnel", "traffic_light"]);

export function cloneOverlay(overlay: OverlayJson): OverlayJson {
  return {
    kind: overlay.kind,
    closed: overlay.closed,
    points_px: overlay.points_px.map(([x, y]) => [x, y] as [number, number]),
  };
}

/** Index of the vertex under (x, y), or null. Nearest wins within the radius. */
export function hitVertex(
  overlay: OverlayJson,
  x: number,
  y: number,
  radius: number = VERTEX_HIT_RADIUS_PX,
): number | null {
  let best: number | null = null;
  let bestDist = radius;
  overlay.points_px.forEach(([px, py], i) => {
    const d = Math.hypot(px - x, py - y);
    if (d <= bestDist) {
      best = i;
      bestDist = d;
    }
  });
  return best;
}

export function moveVertex(overlay: OverlayJson, index: number, x: number, y: number): OverlayJson {
  const out = cloneOverlay(overlay);
  if (index >= 0 && index < out.points_px.length) {
    out.points_px[index] = [x, y];
  }
  return out;
}

export function overlaysEqual(a: OverlayJson, b: OverlayJson): boolean {
  return (
    a.points_px.length === b.points_px.length &&
    a.points_px.every(([x, y], i) => b.points_px[i]![0] === x && b.points_px[i]![1] === y)
  );
}

/** Whether vertex dragging can be mapped back onto this detection's schema. */
export function isEditable(objectClass: string): boolean {
  return POLYLINE_CLASSES.has(objectClass) || DRAGGABLE_KEYPOINT_CLASSES.has(objectClass);
}

export function pxToPlanar(aff: PxToPlanar, x: number, y: number): [number, number] {
  return [
    aff.origin[0] + x * aff.dx[0] + y * aff.dy[0],
    aff.origin[1] + x * aff.dx[1] + y * aff.dy[1],
  ];
}

/**
 * Build the relabel replacement: the original detection with its xy geometry
 * replaced by the dragged overlay vertices (z components are kept as-is;
 * dragging is in-plane).
 */
export function rebuildDetection(
  original: DetectionJson,
  edited: OverlayJson,
  aff: PxToPlanar,
): DetectionJson {
  const values = original.values;
  if (!values) {
    throw new Error("relabel requires a single-vector detection");
  }
  if (!isEditable(original.class)) {
    throw new Error(`class ${original.class} is not vertex-editable`);
  }
  const planar = edited.points_px.map(([x, y]) => pxToPlanar(aff, x, y));
  const out = values.slice();

  if (POLYLINE_CLASSES.has(original.class)) {
    if (planar.length * 3 !== values.length) {
      throw new Error("vertex count changed; only dragging is supported");
    }
    planar.forEach(([px, py], k) => {
      out[3 * k] = px;
      out[3 * k + 1] = py;
    });
  } else {
    // two keypoints at values[0:3] and values[3:6]; traffic_light's second
    // point is center + axis, so its slot stores the difference
    const [p0, p1] = planar;
    if (planar.length !== 2 || !p0 || !p1) {
      throw new Error("keypoint overlay must carry exactly two points");
    }
    out[0] = p0[0];
    out[1] = p0[1];
    if (original.class === "traffic_light") {
      out[3] = p1[0] - p0[0];
      out[4] = p1[1] - p0[1];
    } else {
      out[3] = p1[0];
      out[4] = p1[1];
    }
  }
  return { ...original, values: out };
}

export interface DrawStyle {
  stroke: string;
  vertexFill: string;
  vertexRadius: number;
}

export const DEFAULT_STYLE: DrawStyle = {
  stroke: "#21c462",
  vertexFill: "#ffd23e",
  vertexRadius: 4,
};

/** Draw the overlay onto a 2D context already scaled to tile pixels. */
export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  overlay: OverlayJson,
  style: DrawStyle = DEFAULT_STYLE,
): void {
  const pts = overlay.points_px;
  if (pts.length === 0) return;
  ctx.save();
  ctx.strokeStyle = style.stroke;
  ctx.lineWidth = 2;
  ctx.beginPath();
  const [x0, y0] = pts[0]!;
  ctx.moveTo(x0, y0);
  for (let i = 1; i < pts.length; i++) {
    const [x, y] = pts[i]!;
    ctx.lineTo(x, y);
  }
  if (overlay.closed) ctx.closePath();
  ctx.stroke();
  for (const [x, y] of pts) {
    ctx.beginPath();
    ctx.arc(x, y, style.vertexRadius, 0, 2 * Math.PI);
    ctx.fillStyle = style.vertexFill;
    ctx.fill();
    ctx.stroke();
  }
  ctx.restore();
}
