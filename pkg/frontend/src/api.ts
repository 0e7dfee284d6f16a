import type {
  DecisionWord,
  DetectionJson,
  ItemDetail,
  MetricsJson,
  ReviewItemJson,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

/** true for the 409 returned when an item was decided elsewhere */
export function isConflict(err: unknown): boolean {
  return err instanceof ApiError && err.status === 409;
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, detail);
}

/** Thin fetch client; every mutation in the app goes through exactly one call here. */
export class ReviewApi {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  tileUrl(relative: string): string {
    return this.url(relative);
  }

  async queue(status: string = "pending", limit: number = 200): Promise<ReviewItemJson[]> {
    const res = await fetch(this.url(`/api/queue?status=${status}&limit=${limit}`));
    await raiseForStatus(res);
    const body = (await res.json()) as { items: ReviewItemJson[] };
    return body.items;
  }

  async item(id: string): Promise<ItemDetail> {
    const res = await fetch(this.url(`/api/item/${encodeURIComponent(id)}`));
    await raiseForStatus(res);
    return (await res.json()) as ItemDetail;
  }

  async decide(
    id: string,
    decision: DecisionWord,
    relabel?: DetectionJson,
    reviewer?: string,
  ): Promise<ReviewItemJson> {
    const res = await fetch(this.url(`/api/item/${encodeURIComponent(id)}/decision`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ decision, relabel: relabel ?? null, reviewer: reviewer ?? null }),
    });
    await raiseForStatus(res);
    return (await res.json()) as ReviewItemJson;
  }

  async metrics(windowS: number = 3600): Promise<MetricsJson> {
    const res = await fetch(this.url(`/api/metrics?window=${windowS}`));
    await raiseForStatus(res);
    return (await res.json()) as MetricsJson;
  }
}
