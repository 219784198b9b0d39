/** DOM shell: canvas with zoom/pan and window drawing, swatch labeling,
 * class sidebar, plane preview gallery, model save/load. */

import { ServiceClient, ServiceError, type PreviewResponse } from "./api.js";
import {
  rectFromDrag,
  rectToScreen,
  screenToImage,
  type Point,
  type ViewTransform,
} from "./geometry.js";
import { LABEL_SUGGESTIONS, buildAssignmentPayload, unlabeledIndices } from "./swatches.js";
import { DEFAULT_K_RANGE, WindowStore } from "./windows.js";

const UNKNOWN_OVERLAY_COLOR = "#ff00aa"; // alert color reserved for UNKNOWN
const CLASS_OVERLAY_COLORS = [
  "#4e79a7", "#f28e2b", "#59a045", "#e15759", "#76b7b2",
  "#edc948", "#b07aa1", "#9c755f",
];

const STATUS_COLORS: Record<string, string> = {
  drawn: "#888888",
  clustered: "#2a7fff",
  committed: "#2fa84f",
};

interface DocState {
  id: string;
  width: number;
  height: number;
  bitmap: ImageBitmap;
}

export class TrainerApp {
  private readonly client: ServiceClient;
  private readonly windows = new WindowStore();
  private sessionId: string | null = null;
  private doc: DocState | null = null;
  private view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
  private dragStart: Point | null = null;
  private dragCurrent: Point | null = null;
  private panning = false;
  private panAnchor: Point | null = null;
  private selectedWindow: number | null = null;
  private preview: PreviewResponse | null = null;
  private overlayVisibility = new Map<string, boolean>();

  private canvas!: HTMLCanvasElement;
  private ctx!: CanvasRenderingContext2D;

  constructor(private readonly root: HTMLElement, client?: ServiceClient) {
    this.client = client ?? new ServiceClient("");
    this.buildLayout();
    void this.startSession();
  }

  // ---- layout -------------------------------------------------------

  private buildLayout(): void {
    this.root.innerHTML = `
      <header class="bar">
        <strong>chromaplane trainer</strong>
        <label class="upload-btn">Open page
          <input type="file" id="file-input" accept="image/png,image/jpeg" hidden>
        </label>
        <label>k
          <select id="k-picker"></select>
        </label>
        <label><input type="checkbox" id="k-advanced"> advanced k</label>
        <span id="zoom-indicator"></span>
        <span class="spacer"></span>
        <button id="preview-btn">Preview planes</button>
        <button id="save-model-btn">Save model</button>
        <label class="upload-btn">Load model
          <input type="file" id="model-input" accept="application/json" hidden>
        </label>
        <span id="status-line"></span>
      </header>
      <main>
        <section class="canvas-wrap"><canvas id="page-canvas"></canvas></section>
        <aside class="sidebar">
          <h3>Windows <small id="progress-hint"></small></h3>
          <ul id="window-list"></ul>
          <div id="swatch-panel"></div>
          <h3>Classes</h3>
          <ul id="class-list"></ul>
          <div id="preview-panel"></div>
        </aside>
      </main>
      <datalist id="label-suggestions">
        ${LABEL_SUGGESTIONS.map((s) => `<option value="${s}">`).join("")}
      </datalist>
    `;
    this.canvas = this.root.querySelector<HTMLCanvasElement>("#page-canvas")!;
    this.ctx = this.canvas.getContext("2d")!;
    this.populateKPicker(false);

    this.root.querySelector<HTMLInputElement>("#file-input")!
      .addEventListener("change", (e) => void this.onFileChosen(e));
    this.root.querySelector<HTMLInputElement>("#model-input")!
      .addEventListener("change", (e) => void this.onModelChosen(e));
    this.root.querySelector<HTMLInputElement>("#k-advanced")!
      .addEventListener("change", (e) =>
        this.populateKPicker((e.target as HTMLInputElement).checked));
    this.root.querySelector("#preview-btn")!
      .addEventListener("click", () => void this.refreshPreview());
    this.root.querySelector("#save-model-btn")!
      .addEventListener("click", () => void this.saveModel());

    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.canvas.addEventListener("pointerup", (e) => this.onPointerUp(e));
    this.canvas.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
    new ResizeObserver(() => this.resizeCanvas()).observe(this.canvas.parentElement!);
    this.resizeCanvas();
  }

  private populateKPicker(advanced: boolean): void {
    const picker = this.root.querySelector<HTMLSelectElement>("#k-picker")!;
    const previous = Number(picker.value) || DEFAULT_K_RANGE[0];
    const [lo, hi] = advanced ? [1, 8] : DEFAULT_K_RANGE;
    picker.innerHTML = "";
    for (let k = lo; k <= hi; k++) {
      const opt = document.createElement("option");
      opt.value = String(k);
      opt.textContent = String(k);
      picker.appendChild(opt);
    }
    picker.value = String(Math.min(hi, Math.max(lo, previous)));
  }

  private status(text: string, isError = false): void {
    const line = this.root.querySelector<HTMLElement>("#status-line")!;
    line.textContent = text;
    line.classList.toggle("error", isError);
  }

  // ---- session / document ------------------------------------------

  private async startSession(): Promise<void> {
    try {
      this.sessionId = await this.client.createSession();
      this.status("session ready; open a page to begin");
    } catch (e) {
      this.status(`cannot reach service: ${(e as Error).message}`, true);
    }
  }

  private async onFileChosen(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file || !this.sessionId) return;
    try {
      const bytes = await file.arrayBuffer();
      const up = await this.client.uploadDocument(this.sessionId, bytes);
      const blob = await (await fetch(
        this.client.documentImageUrl(this.sessionId, up.document_id))).blob();
      const bitmap = await createImageBitmap(blob);
      this.doc = { id: up.document_id, width: up.width, height: up.height, bitmap };
      this.fitToCanvas();
      this.status(`loaded ${file.name} (${up.width}x${up.height})`);
      this.redraw();
    } catch (e) {
      this.status(`upload failed: ${(e as Error).message}`, true);
    } finally {
      input.value = "";
    }
  }

  private fitToCanvas(): void {
    if (!this.doc) return;
    const scale = Math.min(this.canvas.width / this.doc.width,
                           this.canvas.height / this.doc.height);
    this.view = {
      zoom: scale,
      panX: (this.canvas.width - this.doc.width * scale) / 2,
      panY: (this.canvas.height - this.doc.height * scale) / 2,
    };
  }

  private resizeCanvas(): void {
    const wrap = this.canvas.parentElement!;
    this.canvas.width = wrap.clientWidth || 800;
    this.canvas.height = wrap.clientHeight || 600;
    this.redraw();
  }

  // ---- canvas interaction -------------------------------------------

  private canvasPoint(e: PointerEvent | WheelEvent): Point {
    const box = this.canvas.getBoundingClientRect();
    return { x: e.clientX - box.left, y: e.clientY - box.top };
  }

  private onPointerDown(e: PointerEvent): void {
    if (!this.doc) return;
    this.canvas.setPointerCapture(e.pointerId);
    const p = this.canvasPoint(e);
    if (e.button === 1 || e.button === 2 || e.shiftKey) {
      this.panning = true;
      this.panAnchor = p;
    } else {
      this.dragStart = p;
      this.dragCurrent = p;
    }
  }

  private onPointerMove(e: PointerEvent): void {
    const p = this.canvasPoint(e);
    if (this.panning && this.panAnchor) {
      this.view.panX += p.x - this.panAnchor.x;
      this.view.panY += p.y - this.panAnchor.y;
      this.panAnchor = p;
      this.redraw();
    } else if (this.dragStart) {
      this.dragCurrent = p;
      this.redraw();
    }
  }

  private onPointerUp(e: PointerEvent): void {
    const p = this.canvasPoint(e);
    if (this.panning) {
      this.panning = false;
      this.panAnchor = null;
      return;
    }
    if (!this.dragStart || !this.doc) return;
    const rect = rectFromDrag(this.dragStart, p, this.view, this.doc.width, this.doc.height);
    this.dragStart = null;
    this.dragCurrent = null;
    if (rect === null) {
      this.status("window discarded (too small or outside the page)");
      this.redraw();
      return;
    }
    const k = Number(this.root.querySelector<HTMLSelectElement>("#k-picker")!.value);
    const win = this.windows.add(rect, k);
    this.selectedWindow = win.id;
    this.renderWindowList();
    this.redraw();
    void this.requestClusters(win.id);
  }

  private onWheel(e: WheelEvent): void {
    if (!this.doc) return;
    e.preventDefault();
    const p = this.canvasPoint(e);
    const anchor = screenToImage(p, this.view);
    const factor = e.deltaY < 0 ? 1.2 : 1 / 1.2;
    const zoom = Math.min(8, Math.max(0.25, this.view.zoom * factor));
    this.view = {
      zoom,
      panX: p.x - anchor.x * zoom,
      panY: p.y - anchor.y * zoom,
    };
    this.redraw();
  }

  // ---- training flow -------------------------------------------------

  private async requestClusters(winId: number): Promise<void> {
    if (!this.sessionId || !this.doc) return;
    if (!this.windows.beginClusterRequest(winId)) return;
    this.renderWindowList();
    const win = this.windows.get(winId);
    try {
      const resp = await this.client.clusterWindow(
        this.sessionId, this.doc.id, win.rect, win.k);
      this.windows.applyClusterResponse(winId, resp);
      this.status(`window ${winId}: ${resp.centroids.length} swatches (seed ${resp.seed})`);
    } catch (e) {
      const msg = e instanceof ServiceError ? `${e.code}: ${e.message}` : (e as Error).message;
      this.windows.applyClusterError(winId, msg);
      this.status(`cluster request failed: ${msg}`, true);
    }
    this.renderWindowList();
    this.renderSwatchPanel();
    this.redraw();
  }

  private async commitWindow(winId: number): Promise<void> {
    if (!this.sessionId) return;
    const win = this.windows.get(winId);
    if (!this.windows.canCommit(winId) || win.pendingId === null) return;
    const unlabeled = unlabeledIndices(win.cards);
    if (unlabeled.length > 0) {
      this.status(`label swatches ${unlabeled.join(", ")} before committing`, true);
      this.renderSwatchPanel();
      return;
    }
    try {
      const payload = buildAssignmentPayload(win.cards);
      const summary = await this.client.commitLabels(this.sessionId, win.pendingId, payload);
      this.windows.markCommitted(winId);
      this.renderClassList(summary.classes.map((c) => `${c.label} (${c.centroids})`),
                           summary.warnings);
      this.status(`window ${winId} committed`);
    } catch (e) {
      this.status(`commit failed: ${(e as Error).message}`, true);
    }
    this.renderWindowList();
    this.renderSwatchPanel();
    this.redraw();
  }

  private async refreshPreview(): Promise<void> {
    if (!this.sessionId || !this.doc) return;
    try {
      this.preview = await this.client.preview(this.sessionId, this.doc.id);
      this.overlayVisibility.clear();
      this.status(this.preview.flagged
        ? `preview: FLAGGED, unknown ${(this.preview.unknown_fraction * 100).toFixed(2)}%`
        : `preview ready (unknown ${(this.preview.unknown_fraction * 100).toFixed(2)}%)`);
      this.renderPreviewPanel();
    } catch (e) {
      if (e instanceof ServiceError && e.status === 409) {
        this.status("train at least one window before previewing", true);
      } else {
        this.status(`preview failed: ${(e as Error).message}`, true);
      }
    }
  }

  private async saveModel(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const blob = await this.client.getModelBytes(this.sessionId);
      const url = URL.createObjectURL(blob);
      const a = document.createElement("a");
      a.href = url;
      a.download = "model.cpm.json";
      a.click();
      URL.revokeObjectURL(url);
    } catch (e) {
      this.status(`save failed: ${(e as Error).message}`, true);
    }
  }

  private async onModelChosen(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file || !this.sessionId) return;
    try {
      const summary = await this.client.putModel(this.sessionId, await file.arrayBuffer());
      this.renderClassList(summary.classes.map((c) => `${c.label} (${c.centroids})`),
                           summary.warnings);
      this.status(`model loaded: ${summary.classes.length} classes`);
    } catch (e) {
      this.status(`model rejected: ${(e as Error).message}`, true);
    } finally {
      input.value = "";
    }
  }

  // ---- rendering ------------------------------------------------------

  private redraw(): void {
    const { ctx, canvas } = this;
    ctx.fillStyle = "#2b2b2b";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const zoomLabel = this.root.querySelector<HTMLElement>("#zoom-indicator")!;
    zoomLabel.textContent = `${(this.view.zoom * 100).toFixed(0)}%`;
    if (!this.doc) return;

    ctx.imageSmoothingEnabled = this.view.zoom < 1;
    ctx.drawImage(this.doc.bitmap,
      this.view.panX, this.view.panY,
      this.doc.width * this.view.zoom, this.doc.height * this.view.zoom);

    for (const win of this.windows.list()) {
      const r = rectToScreen(win.rect, this.view);
      ctx.lineWidth = win.id === this.selectedWindow ? 3 : 1.5;
      ctx.strokeStyle = STATUS_COLORS[win.status];
      ctx.strokeRect(r.x, r.y, r.w, r.h);
      ctx.fillStyle = STATUS_COLORS[win.status];
      ctx.font = "12px sans-serif";
      ctx.fillText(`#${win.id} k=${win.k}`, r.x + 3, r.y - 4);
    }

    if (this.dragStart && this.dragCurrent) {
      ctx.setLineDash([5, 4]);
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1;
      ctx.strokeRect(this.dragStart.x, this.dragStart.y,
        this.dragCurrent.x - this.dragStart.x, this.dragCurrent.y - this.dragStart.y);
      ctx.setLineDash([]);
    }
  }

  private renderWindowList(): void {
    const list = this.root.querySelector<HTMLElement>("#window-list")!;
    this.root.querySelector<HTMLElement>("#progress-hint")!.textContent =
      this.windows.progressHint();
    list.innerHTML = "";
    for (const win of this.windows.list()) {
      const li = document.createElement("li");
      li.classList.toggle("selected", win.id === this.selectedWindow);
      const label = document.createElement("span");
      label.textContent = `#${win.id} [${win.rect.join(", ")}] k=${win.k} — ${win.status}`;
      label.style.color = STATUS_COLORS[win.status];
      li.appendChild(label);
      if (win.error) {
        const err = document.createElement("div");
        err.className = "inline-error";
        err.textContent = win.error;
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.addEventListener("click", () => void this.requestClusters(win.id));
        err.appendChild(retry);
        li.appendChild(err);
      }
      li.addEventListener("click", () => {
        this.selectedWindow = win.id;
        this.renderWindowList();
        this.renderSwatchPanel();
        this.redraw();
      });
      list.appendChild(li);
    }
  }

  private renderSwatchPanel(): void {
    const panel = this.root.querySelector<HTMLElement>("#swatch-panel")!;
    panel.innerHTML = "";
    if (this.selectedWindow === null) return;
    const win = this.windows.get(this.selectedWindow);
    if (win.status === "drawn") {
      panel.textContent = win.requestInFlight ? "clustering..." : "";
      return;
    }
    for (const card of win.cards) {
      const row = document.createElement("div");
      row.className = "swatch-row";
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.style.background = card.hex;
      chip.title = `lab(${card.lab.map((v) => v.toFixed(1)).join(", ")})`;
      row.appendChild(chip);
      const meta = document.createElement("small");
      meta.textContent = `${card.count} px, r=${card.radius.toFixed(1)}`;
      row.appendChild(meta);
      const input = document.createElement("input");
      input.value = card.label;
      input.placeholder = "class label";
      input.setAttribute("list", "label-suggestions");
      input.disabled = win.status === "committed";
      input.addEventListener("input", () => {
        card.label = input.value;
      });
      row.appendChild(input);
      panel.appendChild(row);
    }
    const commit = document.createElement("button");
    commit.textContent = win.status === "committed" ? "committed" : "Commit labels";
    commit.disabled = !this.windows.canCommit(win.id);
    commit.addEventListener("click", () => void this.commitWindow(win.id));
    panel.appendChild(commit);
    if (win.seed !== null) {
      const seed = document.createElement("small");
      seed.textContent = ` seed ${win.seed}`;
      panel.appendChild(seed);
    }
  }

  private renderClassList(lines: string[], warnings: string[] = []): void {
    const list = this.root.querySelector<HTMLElement>("#class-list")!;
    list.innerHTML = "";
    for (const line of lines) {
      const li = document.createElement("li");
      li.textContent = line;
      list.appendChild(li);
    }
    for (const warning of warnings) {
      const li = document.createElement("li");
      li.className = "inline-error";
      li.textContent = `warning: ${warning}`;
      list.appendChild(li);
    }
  }

  private renderPreviewPanel(): void {
    const panel = this.root.querySelector<HTMLElement>("#preview-panel")!;
    panel.innerHTML = "<h3>Plane preview</h3>";
    if (!this.preview) return;

    const toggles = document.createElement("div");
    const overlay = document.createElement("canvas");
    const labels = [...this.preview.legend, "UNKNOWN"];
    for (const label of labels) {
      const btn = document.createElement("label");
      btn.className = "toggle";
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = this.overlayVisibility.get(label) ?? true;
      box.addEventListener("change", () => {
        this.overlayVisibility.set(label, box.checked);
        void this.paintOverlay(overlay);
      });
      btn.appendChild(box);
      const chip = document.createElement("span");
      chip.className = "chip small";
      chip.style.background = label === "UNKNOWN"
        ? UNKNOWN_OVERLAY_COLOR
        : CLASS_OVERLAY_COLORS[this.preview.legend.indexOf(label) % CLASS_OVERLAY_COLORS.length];
      btn.appendChild(chip);
      btn.appendChild(document.createTextNode(
        `${label}: ${this.preview.histogram[label] ?? 0}`));
      toggles.appendChild(btn);
    }
    panel.appendChild(toggles);
    panel.appendChild(overlay);
    void this.paintOverlay(overlay);

    const gallery = document.createElement("div");
    gallery.className = "gallery";
    for (const plane of this.preview.planes) {
      const fig = document.createElement("figure");
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${plane.png}`;
      img.alt = plane.label;
      fig.appendChild(img);
      const cap = document.createElement("figcaption");
      cap.textContent = `${plane.label} (${plane.count} px)`;
      fig.appendChild(cap);
      gallery.appendChild(fig);
    }
    panel.appendChild(gallery);
  }

  /** Recolor the single-channel label map into a class overlay. */
  private async paintOverlay(target: HTMLCanvasElement): Promise<void> {
    if (!this.preview) return;
    const img = new Image();
    img.src = `data:image/png;base64,${this.preview.label_map_png}`;
    await img.decode();
    const w = img.naturalWidth;
    const h = img.naturalHeight;
    const scratch = document.createElement("canvas");
    scratch.width = w;
    scratch.height = h;
    const sctx = scratch.getContext("2d")!;
    sctx.drawImage(img, 0, 0);
    const data = sctx.getImageData(0, 0, w, h);
    const px = data.data;
    const palette: Record<number, [number, number, number] | null> = {};
    this.preview.legend.forEach((label, i) => {
      palette[i] = (this.overlayVisibility.get(label) ?? true)
        ? hexToRgb(CLASS_OVERLAY_COLORS[i % CLASS_OVERLAY_COLORS.length])
        : null;
    });
    palette[255] = (this.overlayVisibility.get("UNKNOWN") ?? true)
      ? hexToRgb(UNKNOWN_OVERLAY_COLOR)
      : null;
    for (let i = 0; i < px.length; i += 4) {
      const color = palette[px[i]] ?? null;
      if (color === null) {
        px[i + 3] = 0;
      } else {
        px[i] = color[0];
        px[i + 1] = color[1];
        px[i + 2] = color[2];
        px[i + 3] = 255;
      }
    }
    const maxW = 360;
    const scale = Math.min(1, maxW / w);
    target.width = Math.round(w * scale);
    target.height = Math.round(h * scale);
    sctx.putImageData(data, 0, 0);
    const tctx = target.getContext("2d")!;
    tctx.imageSmoothingEnabled = false;
    tctx.drawImage(scratch, 0, 0, target.width, target.height);
  }
}

function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}
