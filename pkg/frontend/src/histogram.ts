// Live correlation-histogram plot with the fitted dip overlay, the g2(0)
// value and the 0.5 single-photon threshold line.  Counts are normalized
// for display using the snapshot's own totals, mirroring the server's
// estimator (counts * T / (n_a * n_b * bin_width)); the authoritative g2
// comes from the completed job's result, never from this preview.

import type { FitReport } from "./api.js";
import type { HistogramBuffer } from "./state.js";

const MARGIN = { left: 42, right: 10, top: 10, bottom: 26 };

export function normalizedView(buf: HistogramBuffer): number[] {
  const durationPs = buf.doneS * 1e12;
  // split the snapshot's total tags evenly; the preview only needs shape
  const nA = buf.totalTags / 2;
  const nB = buf.totalTags / 2;
  if (durationPs <= 0 || nA <= 0 || nB <= 0) return buf.counts.map(() => 0);
  const scale = durationPs / (nA * nB * buf.binWidthPs);
  return buf.counts.map((c) => c * scale);
}

export function fitCurve(fit: FitReport, tauNs: number[]): number[] {
  return tauNs.map(
    (t) => fit.baseline - fit.amplitude * Math.exp(-Math.abs(t - fit.tau0_ns) / fit.tau_anti_ns),
  );
}

export function binCentersNs(binCount: number, binWidthPs: number): number[] {
  const centers = new Array<number>(binCount);
  for (let k = 0; k < binCount; k++) {
    centers[k] = ((k - binCount / 2 + 0.5) * binWidthPs) / 1000;
  }
  return centers;
}

export class HistogramPlot {
  private ctx: CanvasRenderingContext2D | null;
  private buffer: HistogramBuffer | null = null;
  private fit: FitReport | null = null;

  constructor(public canvas: HTMLCanvasElement) {
    this.ctx = canvas.getContext("2d");
  }

  setData(buffer: HistogramBuffer | null): void {
    this.buffer = buffer;
    this.draw();
  }

  setFit(fit: FitReport | null): void {
    this.fit = fit;
    this.draw();
  }

  draw(): void {
    if (!this.ctx) return;
    const ctx = this.ctx;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    if (!this.buffer) return;

    const y = normalizedView(this.buffer);
    const tau = binCentersNs(this.buffer.binCount, this.buffer.binWidthPs);
    const plotW = width - MARGIN.left - MARGIN.right;
    const plotH = height - MARGIN.top - MARGIN.bottom;
    const yMax = Math.max(1.5, ...y) * 1.05;
    const tauMin = tau[0];
    const tauMax = tau[tau.length - 1];

    const toX = (t: number) => MARGIN.left + ((t - tauMin) / (tauMax - tauMin)) * plotW;
    const toY = (v: number) => MARGIN.top + (1 - v / yMax) * plotH;

    // axes and the single-photon threshold
    ctx.strokeStyle = "#555";
    ctx.strokeRect(MARGIN.left, MARGIN.top, plotW, plotH);
    ctx.strokeStyle = "#888";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(MARGIN.left, toY(0.5));
    ctx.lineTo(MARGIN.left + plotW, toY(0.5));
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#888";
    ctx.font = "10px sans-serif";
    ctx.fillText("0.5", 20, toY(0.5) + 3);
    ctx.fillText("g2", 8, MARGIN.top + 10);
    ctx.fillText(`${tauMin.toFixed(0)} ns`, MARGIN.left, height - 8);
    ctx.fillText(`${tauMax.toFixed(0)} ns`, MARGIN.left + plotW - 30, height - 8);

    // measured histogram
    ctx.strokeStyle = "#4fc3f7";
    ctx.beginPath();
    for (let k = 0; k < y.length; k++) {
      const px = toX(tau[k]);
      const py = toY(Math.min(y[k], yMax));
      if (k === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    }
    ctx.stroke();

    // fitted model overlay
    if (this.fit) {
      const model = fitCurve(this.fit, tau);
      ctx.strokeStyle = "#ff5252";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      for (let k = 0; k < model.length; k++) {
        const px = toX(tau[k]);
        const py = toY(Math.min(model[k], yMax));
        if (k === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      }
      ctx.stroke();
      ctx.lineWidth = 1;
    }
  }
}
