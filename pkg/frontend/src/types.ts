// Payload shapes of the review API; the UI is a pure projection of these.

export type ReviewStatus = "pending" | "accepted" | "rejected" | "relabeled";
export type DecisionWord = "accept" | "reject" | "relabel";

export interface SlotJson {
  s: number;
  class?: string;
  values: number[];
}

export interface DetectionJson {
  id: string;
  class: string;
  values?: number[];
  slots?: SlotJson[];
  confidence: number;
  source: string;
  tile_id?: string | null;
}

export interface ReviewItemJson {
  id: string;
  detection: DetectionJson;
  status: ReviewStatus;
  relabel: DetectionJson | null;
  created_at: number;
  decided_at: number | null;
  reviewer: string | null;
}

export interface OverlayJson {
  kind: "polyline" | "keypoints";
  closed: boolean;
  points_px: [number, number][]; // [x, y] = [col, row] in tile image space
}

// planar(x_px, y_px) = origin + x_px * dx + y_px * dy
export interface PxToPlanar {
  origin: [number, number];
  dx: [number, number];
  dy: [number, number];
}

export interface TileRef {
  id: string;
  url: string;
  size: number;
  resolution: number;
  overlay: OverlayJson;
  px_to_planar: PxToPlanar;
}

export interface ItemDetail extends ReviewItemJson {
  tile: TileRef | null;
}

export interface MetricsJson {
  total: number;
  auto_accepted: number;
  reviewed: number;
  automation_ratio: number | null;
  throughput_per_s: number;
  window_s: number;
}
