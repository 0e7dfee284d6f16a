// @vitest-environment node
//
// End-to-end against the real review API: seeds a store with the Python
// pipeline, serves it, and drives the client through queue -> detail ->
// decisions, including the 409 conflict path and durability across a server
// restart. Skips itself when the Python backend is not installed.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { isConflict, ReviewApi } from "../src/api";
import { rebuildDetection } from "../src/overlay";

const PORT = 8765 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

function backendAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import thma.cli"], { timeout: 30_000 });
  return probe.status === 0;
}

const HAVE_BACKEND = backendAvailable();
let workDir: string;
let serverProc: ChildProcess | null = null;

async function startServer(): Promise<void> {
  serverProc = spawn(
    "python3",
    ["-m", "thma.cli", "serve", "--store", join(workDir, "run", "store"), "--port", String(PORT)],
    { stdio: "ignore" },
  );
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/api/metrics`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("review API did not come up");
}

async function stopServer(): Promise<void> {
  if (!serverProc) return;
  serverProc.kill("SIGTERM");
  await new Promise((r) => setTimeout(r, 500));
  serverProc = null;
}

describe.skipIf(!HAVE_BACKEND)("against a live review API", () => {
  const api = new ReviewApi(BASE);

  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "thma-ui-"));
    const run = spawnSync(
      "python3",
      ["-m", "thma.cli", "run", "--out", join(workDir, "run")],
      { timeout: 300_000 },
    );
    expect(run.status).toBe(0);
    await startServer();
  }, 360_000);

  afterAll(async () => {
    await stopServer();
    if (workDir) rmSync(workDir, { recursive: true, force: true });
  });

  it("loads the seeded pending queue with overlay geometry", async () => {
    const items = await api.queue();
    expect(items.length).toBeGreaterThan(0);
    const detail = await api.item(items[0]!.id);
    expect(detail.tile).not.toBeNull();
    expect(detail.tile!.overlay.points_px.length).toBeGreaterThan(1);
    expect(detail.tile!.px_to_planar.dx).toHaveLength(2);
    const png = await fetch(`${BASE}${detail.tile!.url}`);
    expect(png.status).toBe(200);
    expect(png.headers.get("content-type")).toBe("image/png");
  });

  it("accepts, rejects and relabels; conflicts surface as 409", async () => {
    const items = await api.queue();
    expect(items.length).toBeGreaterThanOrEqual(3);
    const [a, b, c] = items as [typeof items[0], typeof items[0], typeof items[0]];

    const accepted = await api.decide(a.id, "accept", undefined, "annotator-1");
    expect(accepted.status).toBe("accepted");

    await expect(api.decide(a.id, "reject")).rejects.toSatisfy(isConflict);

    const rejected = await api.decide(b.id, "reject");
    expect(rejected.status).toBe("rejected");

    const detail = await api.item(c.id);
    const edited = structuredClone(detail.tile!.overlay);
    edited.points_px[0] = [edited.points_px[0]![0] + 4, edited.points_px[0]![1]];
    const replacement = rebuildDetection(detail.detection, edited, detail.tile!.px_to_planar);
    const relabeled = await api.decide(c.id, "relabel", replacement);
    expect(relabeled.status).toBe("relabeled");
    expect(relabeled.relabel!.source).toBe("human");
    expect(relabeled.relabel!.confidence).toBe(1.0);

    const metrics = await api.metrics();
    expect(metrics.total).toBeGreaterThan(0);
    expect(metrics.automation_ratio).not.toBeNull();
  });

  it("keeps decisions across a server restart", async () => {
    const decided = (await api.queue("all")).filter((i) => i.status !== "pending");
    expect(decided.length).toBeGreaterThanOrEqual(3);
    await stopServer();
    await startServer();
    for (const item of decided) {
      const back = await api.item(item.id);
      expect(back.status).toBe(item.status);
    }
  }, 60_000);
});
