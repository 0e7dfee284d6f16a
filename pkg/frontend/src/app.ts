// DOM wiring for the review console: queue list, tile viewer with a draggable
// overlay, decision buttons and a metrics panel. All state is rebuilt from
// API responses; decisions are never applied optimistically.

import { ApiError, isConflict, ReviewApi } from "./api";
import {
  cloneOverlay,
  drawOverlay,
  hitVertex,
  isEditable,
  moveVertex,
  overlaysEqual,
  rebuildDetection,
} from "./overlay";
import {
  applyQueue,
  classOptions,
  emptyState,
  itemClass,
  QueueState,
  removeAndAdvance,
  select,
  setClassFilter,
  visibleItems,
} from "./state";
import type { Banner } from "./state";
import type { DecisionWord, ItemDetail, MetricsJson, OverlayJson } from "./types";

export class App {
  state: QueueState = emptyState();
  detail: ItemDetail | null = null;
  editedOverlay: OverlayJson | null = null;
  metrics: MetricsJson | null = null;
  banner: Banner | null = null;
  tileImage: HTMLImageElement | null = null;
  tileBroken = false;
  private dragIndex: number | null = null;
  private retryAction: (() => void) | null = null;

  constructor(
    readonly api: ReviewApi,
    readonly root: HTMLElement,
  ) {
    root.innerHTML = `
      <aside class="sidebar">
        <h1>thma review</h1>
        <div class="filters">
          <select id="class-filter" title="filter by class"></select>
          <button id="refresh">refresh</button>
        </div>
        <ul id="queue" class="queue"></ul>
        <section id="metrics" class="metrics"></section>
      </aside>
      <main class="viewer">
        <div id="banner" class="banner" hidden></div>
        <div class="canvas-wrap">
          <canvas id="tile-canvas" width="0" height="0"></canvas>
          <div id="tile-error" class="tile-error" hidden>
            tile image unavailable; the item can still be decided
          </div>
        </div>
        <section id="detail" class="detail"></section>
        <div class="actions">
          <button id="accept" class="accept">accept</button>
          <button id="reject" class="reject">reject</button>
          <button id="relabel" class="relabel" disabled>submit relabel</button>
          <button id="reset-edit" disabled>reset vertices</button>
        </div>
      </main>
    `;
    this.el("refresh").addEventListener("click", () => void this.refresh());
    this.el("accept").addEventListener("click", () => void this.decide("accept"));
    this.el("reject").addEventListener("click", () => void this.decide("reject"));
    this.el("relabel").addEventListener("click", () => void this.decide("relabel"));
    this.el("reset-edit").addEventListener("click", () => this.resetEdit());
    (this.el("class-filter") as HTMLSelectElement).addEventListener("change", (e) => {
      this.state = setClassFilter(this.state, (e.target as HTMLSelectElement).value);
      this.renderQueue();
      void this.loadSelected();
    });
    const canvas = this.canvas();
    canvas.addEventListener("mousedown", (e) => this.onMouseDown(e));
    canvas.addEventListener("mousemove", (e) => this.onMouseMove(e));
    window.addEventListener("mouseup", () => (this.dragIndex = null));
  }

  el(id: string): HTMLElement {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as HTMLElement;
  }

  canvas(): HTMLCanvasElement {
    return this.el("tile-canvas") as HTMLCanvasElement;
  }

  // --- data loading --------------------------------------------------------

  async refresh(): Promise<void> {
    try {
      const [items, metrics] = await Promise.all([this.api.queue("pending"), this.api.metrics()]);
      this.state = applyQueue(this.state, items);
      this.metrics = metrics;
      this.banner = null;
      this.retryAction = null;
    } catch (err) {
      this.showError(`queue load failed: ${String(err)}`, () => void this.refresh());
    }
    this.renderQueue();
    this.renderMetrics();
    this.renderBanner();
    await this.loadSelected();
  }

  async loadSelected(): Promise<void> {
    const id = this.state.selectedId;
    if (id === null) {
      this.detail = null;
      this.editedOverlay = null;
      this.tileImage = null;
      this.renderDetail();
      return;
    }
    try {
      const detail = await this.api.item(id);
      this.detail = detail;
      this.editedOverlay = detail.tile ? cloneOverlay(detail.tile.overlay) : null;
      this.tileBroken = false;
      this.tileImage = null;
      if (detail.tile) this.loadTileImage(this.api.tileUrl(detail.tile.url));
    } catch (err) {
      this.showError(`item load failed: ${String(err)}`, () => void this.loadSelected());
    }
    this.renderDetail();
  }

  private loadTileImage(url: string): void {
    const img = new Image();
    img.onload = () => {
      this.tileImage = img;
      this.tileBroken = false;
      this.renderCanvas();
    };
    img.onerror = () => {
      this.tileBroken = true; // degraded mode: keep the item decidable
      this.renderCanvas();
    };
    img.src = url;
  }

  // --- decisions -----------------------------------------------------------

  async decide(word: DecisionWord): Promise<void> {
    const detail = this.detail;
    if (!detail || detail.status !== "pending") return;
    let relabel;
    if (word === "relabel") {
      relabel = this.buildRelabel();
      if (!relabel) return;
    }
    try {
      await this.api.decide(detail.id, word, relabel);
      this.state = removeAndAdvance(this.state, detail.id);
      this.banner = { kind: "info", text: `${detail.id} ${word}ed` };
      this.retryAction = null;
      try {
        this.metrics = await this.api.metrics();
      } catch {
        // metrics refresh is best effort; the decision already landed
      }
      this.renderQueue();
      this.renderMetrics();
      this.renderBanner();
      await this.loadSelected();
    } catch (err) {
      if (isConflict(err)) {
        // decided elsewhere: surface it and resync this item from the server
        this.banner = { kind: "conflict", text: `${detail.id} was already decided` };
        this.retryAction = null;
        this.state = removeAndAdvance(this.state, detail.id);
        this.renderQueue();
        this.renderBanner();
        await this.loadSelected();
      } else if (err instanceof ApiError) {
        this.showError(`decision rejected: ${err.detail}`, null);
        this.renderBanner();
      } else {
        // network failure: offer a retry, change no local state
        this.showError(`network failure: ${String(err)}`, () => void this.decide(word));
        this.renderBanner();
      }
    }
  }

  buildRelabel() {
    const detail = this.detail;
    if (!detail || !detail.tile || !this.editedOverlay) return undefined;
    try {
      return rebuildDetection(detail.detection, this.editedOverlay, detail.tile.px_to_planar);
    } catch (err) {
      this.showError(String(err), null);
      this.renderBanner();
      return undefined;
    }
  }

  resetEdit(): void {
    if (this.detail?.tile) {
      this.editedOverlay = cloneOverlay(this.detail.tile.overlay);
      this.renderCanvas();
      this.renderActions();
    }
  }

  private showError(text: string, retry: (() => void) | null): void {
    this.banner = { kind: "error", text };
    this.retryAction = retry;
  }

  // --- canvas interaction ----------------------------------------------------

  private canvasPoint(e: MouseEvent): [number, number] {
    const canvas = this.canvas();
    const rect = canvas.getBoundingClientRect();
    const sx = rect.width > 0 ? canvas.width / rect.width : 1;
    const sy = rect.height > 0 ? canvas.height / rect.height : 1;
    return [(e.clientX - rect.left) * sx, (e.clientY - rect.top) * sy];
  }

  onMouseDown(e: MouseEvent): void {
    if (!this.editedOverlay || !this.detail) return;
    if (!isEditable(itemClass(this.detail))) return;
    const [x, y] = this.canvasPoint(e);
    this.dragIndex = hitVertex(this.editedOverlay, x, y);
  }

  onMouseMove(e: MouseEvent): void {
    if (this.dragIndex === null || !this.editedOverlay) return;
    const [x, y] = this.canvasPoint(e);
    this.editedOverlay = moveVertex(this.editedOverlay, this.dragIndex, x, y);
    this.renderCanvas();
    this.renderActions();
  }

  // --- rendering ---------------------------------------------------------------

  renderQueue(): void {
    const list = this.el("queue");
    const items = visibleItems(this.state);
    list.innerHTML = "";
    for (const item of items) {
      const li = document.createElement("li");
      li.dataset.id = item.id;
      li.className = item.id === this.state.selectedId ? "selected" : "";
      li.innerHTML = `<span class="cls">${itemClass(item)}</span>
        <span class="id">${item.detection.id}</span>
        <span class="conf">${item.detection.confidence.toFixed(2)}</span>`;
      li.addEventListener("click", () => {
        this.state = select(this.state, item.id);
        this.renderQueue();
        void this.loadSelected();
      });
      list.appendChild(li);
    }
    const filter = this.el("class-filter") as HTMLSelectElement;
    const options = ["all", ...classOptions(this.state)];
    if (filter.options.length !== options.length) {
      filter.innerHTML = options.map((o) => `<option value="${o}">${o}</option>`).join("");
      filter.value = this.state.classFilter;
    }
  }

  renderMetrics(): void {
    const m = this.metrics;
    this.el("metrics").innerHTML = m
      ? `<h2>loop metrics</h2>
         <dl>
           <dt>total</dt><dd>${m.total}</dd>
           <dt>auto-accepted</dt><dd>${m.auto_accepted}</dd>
           <dt>reviewed</dt><dd>${m.reviewed}</dd>
           <dt>automation ratio</dt>
           <dd id="automation-ratio">${m.automation_ratio === null ? "n/a" : m.automation_ratio.toFixed(3)}</dd>
         </dl>`
      : "";
  }

  renderBanner(): void {
    const el = this.el("banner");
    if (!this.banner) {
      el.hidden = true;
      el.innerHTML = "";
      return;
    }
    el.hidden = false;
    el.className = `banner ${this.banner.kind}`;
    el.innerHTML = `<span>${this.banner.text}</span>`;
    if (this.retryAction) {
      const btn = document.createElement("button");
      btn.id = "retry";
      btn.textContent = "retry";
      btn.addEventListener("click", () => this.retryAction?.());
      el.appendChild(btn);
    }
  }

  renderDetail(): void {
    const d = this.detail;
    const box = this.el("detail");
    if (!d) {
      box.innerHTML = "<p>queue empty</p>";
      this.renderCanvas();
      this.renderActions();
      return;
    }
    box.innerHTML = `
      <h2>${d.id}</h2>
      <dl>
        <dt>class</dt><dd id="detail-class">${itemClass(d)}</dd>
        <dt>confidence</dt><dd id="detail-confidence">${d.detection.confidence.toFixed(3)}</dd>
        <dt>status</dt><dd id="detail-status">${d.status}</dd>
        <dt>tile</dt><dd>${d.tile ? d.tile.id : "none"}</dd>
      </dl>`;
    this.renderCanvas();
    this.renderActions();
  }

  renderActions(): void {
    const d = this.detail;
    const pending = d?.status === "pending";
    (this.el("accept") as HTMLButtonElement).disabled = !pending;
    (this.el("reject") as HTMLButtonElement).disabled = !pending;
    const edited =
      !!d?.tile &&
      !!this.editedOverlay &&
      isEditable(itemClass(d!)) &&
      !overlaysEqual(this.editedOverlay, d!.tile.overlay);
    (this.el("relabel") as HTMLButtonElement).disabled = !(pending && edited);
    (this.el("reset-edit") as HTMLButtonElement).disabled = !edited;
  }

  renderCanvas(): void {
    const canvas = this.canvas();
    const errBox = this.el("tile-error");
    const tile = this.detail?.tile ?? null;
    if (!tile) {
      canvas.width = 0;
      canvas.height = 0;
      errBox.hidden = this.detail === null;
      return;
    }
    canvas.width = tile.size;
    canvas.height = tile.size;
    errBox.hidden = !this.tileBroken;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (this.tileImage) {
      ctx.drawImage(this.tileImage, 0, 0);
    } else {
      ctx.fillStyle = "#16181d";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
    }
    if (this.editedOverlay) {
      drawOverlay(ctx, this.editedOverlay);
    }
  }
}

export function mountApp(api: ReviewApi, root: HTMLElement): App {
  return new App(api, root);
}
