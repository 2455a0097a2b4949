// DOM assembly for the two operator panels.  All numbers shown are echoed
// from server payloads; the panels only route events and enforce the
// enabled/disabled rules that mirror the server's one-acquisition rule.

import { ApiError, Client, type FitReport, type JobSummary, type ServerEvent } from "./api.js";
import { Heatmap, type SpotSelection } from "./heatmap.js";
import { HistogramPlot } from "./histogram.js";
import {
  Store,
  applyHistogramSnapshot,
  applyScanRow,
  controlsEnabled,
  emptyScanBuffer,
  pushBanner,
  scanBufferFromResult,
} from "./state.js";
import type { ScanGeometry } from "./coords.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function numberInput(doc: Document, id: string, value: string, step = "1"): HTMLInputElement {
  const input = el(doc, "input", { id, type: "number", value, step });
  return input;
}

export class BannerArea {
  root: HTMLElement;

  constructor(private doc: Document, private store: Store) {
    this.root = el(doc, "div", { class: "banners", id: "banners" });
    store.subscribe(() => this.render());
  }

  render(): void {
    this.root.textContent = "";
    this.store.get().banners.forEach((banner, i) => {
      const div = el(this.doc, "div", { class: "banner", "data-code": banner.code });
      div.appendChild(el(this.doc, "span", {}, `${banner.code}: ${banner.message}`));
      const dismiss = el(this.doc, "button", { class: "dismiss" }, "x");
      dismiss.addEventListener("click", () => {
        const banners = this.store.get().banners.filter((_, j) => j !== i);
        this.store.update({ banners });
      });
      div.appendChild(dismiss);
      this.root.appendChild(div);
    });
  }
}

export function reportError(store: Store, err: unknown): void {
  if (err instanceof ApiError) {
    store.update({ banners: pushBanner(store.get(), err.code, err.message) });
  } else {
    store.update({ banners: pushBanner(store.get(), "client_error", String(err)) });
  }
}

export class ScanPanel {
  root: HTMLElement;
  heatmap: Heatmap;
  startButton: HTMLButtonElement;
  cancelButton: HTMLButtonElement;
  backgroundNote: HTMLElement;
  selectionLabel: HTMLElement;
  progressLabel: HTMLElement;
  private inputs: Record<string, HTMLInputElement>;

  constructor(
    private doc: Document,
    private client: Client,
    private store: Store,
  ) {
    this.root = el(doc, "section", { class: "panel", id: "scan-panel" });
    this.root.appendChild(el(doc, "h2", {}, "2D scan"));

    const controls = el(doc, "div", { class: "controls" });
    this.inputs = {
      extent: numberInput(doc, "scan-extent", "20", "1"),
      resolution: numberInput(doc, "scan-resolution", "100", "1"),
      dwell: numberInput(doc, "scan-dwell", "40", "5"),
      power: numberInput(doc, "scan-power", "10", "1"),
    };
    const labels: Record<string, string> = {
      extent: "extent (um)",
      resolution: "resolution (px)",
      dwell: "integration (ms)",
      power: "power (mW)",
    };
    for (const key of Object.keys(this.inputs)) {
      const wrap = el(doc, "label", {}, labels[key] + " ");
      wrap.appendChild(this.inputs[key]);
      controls.appendChild(wrap);
    }
    this.startButton = el(doc, "button", { id: "scan-start" }, "start scan");
    this.cancelButton = el(doc, "button", { id: "scan-cancel" }, "cancel");
    controls.appendChild(this.startButton);
    controls.appendChild(this.cancelButton);
    this.root.appendChild(controls);

    this.backgroundNote = el(doc, "p", { class: "legend", id: "background-note" }, "");
    this.root.appendChild(this.backgroundNote);

    const canvas = el(doc, "canvas", { id: "scan-canvas", width: "500", height: "500" });
    this.root.appendChild(canvas);
    this.heatmap = new Heatmap(canvas);
    this.heatmap.onSelect = (sel) => this.onSelect(sel);

    this.selectionLabel = el(doc, "p", { id: "selection" }, "no position selected");
    this.progressLabel = el(doc, "p", { id: "scan-progress" }, "");
    this.root.appendChild(this.selectionLabel);
    this.root.appendChild(this.progressLabel);

    this.startButton.addEventListener("click", () => void this.start());
    this.cancelButton.addEventListener("click", () => void this.cancel());
    store.subscribe((s) => this.sync());
    this.sync();
  }

  geometry(): ScanGeometry {
    const extent = Number(this.inputs.extent.value) || 20;
    const res = Number(this.inputs.resolution.value) || 100;
    return { extentUm: [extent, extent], resolution: [res, res] };
  }

  onSelect(sel: SpotSelection): void {
    this.store.update({ selected: sel.stageUm });
    const [fx, fy] = sel.fieldUm;
    this.selectionLabel.textContent =
      `selected (${fx.toFixed(1)}, ${fy.toFixed(1)}) um` +
      (sel.counts !== null ? ` - ${sel.counts} counts` : "");
  }

  sync(): void {
    const state = this.store.get();
    const enabled = controlsEnabled(state);
    this.startButton.disabled = !enabled;
    this.cancelButton.disabled = !(state.busy && state.activeJob?.kind === "scanning");
    const profile = state.session?.profile ?? "";
    this.backgroundNote.textContent =
      profile === "lowcost"
        ? "profile lowcost: expect an elevated background floor (lens autofluorescence)"
        : profile === "reference"
          ? "profile reference: near-dark background floor"
          : "";
  }

  async start(): Promise<void> {
    const state = this.store.get();
    if (!state.session) return;
    const geom = this.geometry();
    this.store.update({
      busy: true,
      scan: emptyScanBuffer(geom),
      fit: null,
    });
    try {
      const { job_id } = await this.client.startScan(state.session.id, {
        extent_um: geom.extentUm,
        resolution: geom.resolution,
        integration_time_ms: Number(this.inputs.dwell.value) || 40,
        laser_power_mw: Number(this.inputs.power.value) || null,
      });
      this.store.update({ activeJob: { id: job_id, kind: "scanning" } });
      const job = await this.client.watchJob(job_id, (e) => this.onEvent(e));
      this.finish(job, geom);
    } catch (err) {
      this.store.update({ busy: false, activeJob: null });
      reportError(this.store, err);
    }
  }

  onEvent(event: ServerEvent): void {
    if (event.event === "row") {
      const scan = this.store.get().scan;
      if (scan) {
        const updated = applyScanRow(scan, event.row, event.counts, event.rows_done);
        this.store.update({ scan: updated });
        this.heatmap.setData(updated);
        this.progressLabel.textContent = `scanning: row ${event.rows_done}/${event.total_rows}`;
      }
    }
  }

  finish(job: JobSummary, geom: ScanGeometry): void {
    if (job.result && job.result.counts) {
      const buffer = scanBufferFromResult(geom, job.result.counts as number[][],
                                          Boolean(job.result.complete));
      this.store.update({ scan: buffer, busy: false, activeJob: null });
      this.heatmap.setData(buffer);
      this.progressLabel.textContent = job.result.complete
        ? "scan complete"
        : "scan cancelled - partial image retained";
    } else {
      this.store.update({ busy: false, activeJob: null });
      this.progressLabel.textContent = `scan ${job.status}`;
      if (job.error) reportError(this.store, new ApiError(500, "job_error", job.error));
    }
  }

  async cancel(): Promise<void> {
    const job = this.store.get().activeJob;
    if (job) {
      try {
        await this.client.cancelJob(job.id);
      } catch (err) {
        reportError(this.store, err);
      }
    }
  }
}

export class HbtPanel {
  root: HTMLElement;
  plot: HistogramPlot;
  startButton: HTMLButtonElement;
  cancelButton: HTMLButtonElement;
  verdictBadge: HTMLElement;
  fitLabel: HTMLElement;
  progressLabel: HTMLElement;
  updateCount = 0; // histogram redraws, observable by tests
  private inputs: Record<string, HTMLInputElement>;

  constructor(
    private doc: Document,
    private client: Client,
    private store: Store,
  ) {
    this.root = el(doc, "section", { class: "panel", id: "hbt-panel" });
    this.root.appendChild(el(doc, "h2", {}, "HBT antibunching"));

    const controls = el(doc, "div", { class: "controls" });
    this.inputs = {
      duration: numberInput(doc, "hbt-duration", "60", "10"),
      binWidth: numberInput(doc, "hbt-bin-width", "200", "50"),
      bins: numberInput(doc, "hbt-bins", "1000", "100"),
    };
    for (const [key, label] of [
      ["duration", "duration (s)"],
      ["binWidth", "bin width (ps)"],
      ["bins", "bins"],
    ] as const) {
      const wrap = el(doc, "label", {}, label + " ");
      wrap.appendChild(this.inputs[key]);
      controls.appendChild(wrap);
    }
    this.startButton = el(doc, "button", { id: "hbt-start" }, "start HBT");
    this.cancelButton = el(doc, "button", { id: "hbt-cancel" }, "cancel");
    controls.appendChild(this.startButton);
    controls.appendChild(this.cancelButton);
    this.root.appendChild(controls);

    const canvas = el(doc, "canvas", { id: "hbt-canvas", width: "520", height: "280" });
    this.root.appendChild(canvas);
    this.plot = new HistogramPlot(canvas);

    this.verdictBadge = el(doc, "span", { id: "verdict", class: "badge" }, "");
    this.fitLabel = el(doc, "span", { id: "fit-summary" }, "");
    this.progressLabel = el(doc, "p", { id: "hbt-progress" }, "");
    const row = el(doc, "p", {});
    row.appendChild(this.verdictBadge);
    row.appendChild(this.fitLabel);
    this.root.appendChild(row);
    this.root.appendChild(this.progressLabel);

    this.startButton.addEventListener("click", () => void this.start());
    this.cancelButton.addEventListener("click", () => void this.cancel());
    store.subscribe(() => this.sync());
    this.sync();
  }

  sync(): void {
    const state = this.store.get();
    this.startButton.disabled = !(controlsEnabled(state) && state.selected !== null);
    this.cancelButton.disabled = !(state.busy && state.activeJob?.kind === "hbt");
  }

  async start(): Promise<void> {
    const state = this.store.get();
    if (!state.session || state.selected === null) return;
    const binWidth = Number(this.inputs.binWidth.value) || 200;
    this.store.update({ busy: true, histogram: null, fit: null });
    this.verdictBadge.textContent = "";
    this.verdictBadge.className = "badge";
    this.fitLabel.textContent = "";
    this.plot.setFit(null);
    try {
      const { job_id } = await this.client.startHbt(state.session.id, {
        x_um: state.selected[0],
        y_um: state.selected[1],
        duration_s: Number(this.inputs.duration.value) || 60,
        bin_width_ps: binWidth,
        bin_count: Number(this.inputs.bins.value) || 1000,
      });
      this.store.update({ activeJob: { id: job_id, kind: "hbt" } });
      const job = await this.client.watchJob(job_id, (e) => this.onEvent(e, binWidth));
      this.finish(job);
    } catch (err) {
      this.store.update({ busy: false, activeJob: null });
      if (err instanceof ApiError && err.status === 409) {
        // surface the conflicting acquisition's progress with the banner
        const active = this.store.get().activeJob;
        const progress = active ? ` (job ${active.id} in progress)` : "";
        reportError(this.store, new ApiError(409, err.code, err.message + progress));
      } else {
        reportError(this.store, err);
      }
    }
  }

  onEvent(event: ServerEvent, binWidthPs: number): void {
    if (event.event === "histogram") {
      const merged = applyHistogramSnapshot(this.store.get().histogram, event, binWidthPs);
      if (merged) {
        this.store.update({ histogram: merged });
        this.plot.setData(merged);
        this.updateCount += 1;
        this.progressLabel.textContent =
          `acquiring: ${merged.doneS.toFixed(0)}/${merged.durationS.toFixed(0)} s, ` +
          `${merged.totalTags} tags`;
      }
    }
  }

  finish(job: JobSummary): void {
    this.store.update({ busy: false, activeJob: null });
    const result = job.result;
    if (!result) {
      this.progressLabel.textContent = `hbt ${job.status}`;
      if (job.error) reportError(this.store, new ApiError(500, "job_error", job.error));
      return;
    }
    const fit = (result.fit ?? null) as FitReport | null;
    this.store.update({ fit });
    if (fit) {
      this.plot.setFit(fit);
      this.verdictBadge.textContent = fit.verdict;
      this.verdictBadge.className = `badge badge-${fit.verdict}`;
      this.fitLabel.textContent =
        ` g2(0) = ${fit.g2_zero.toFixed(3)} +/- ${fit.g2_zero_sigma.toFixed(3)}, ` +
        `tau = ${fit.tau_anti_ns.toFixed(1)} ns`;
    }
    this.progressLabel.textContent = result.complete
      ? `hbt complete: ${result.n_a + result.n_b} tags`
      : `hbt cancelled at ${(result.duration_ps / 1e12).toFixed(1)} s - partial histogram kept`;
  }

  async cancel(): Promise<void> {
    const job = this.store.get().activeJob;
    if (job) {
      try {
        await this.client.cancelJob(job.id);
      } catch (err) {
        reportError(this.store, err);
      }
    }
  }
}
