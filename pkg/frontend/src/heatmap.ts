// Canvas heatmap of the (possibly partially filled) scan image.
// Rendering degrades gracefully where no 2D context exists (jsdom tests);
// the click-to-position mapping works regardless.

import { autoRange, normalizeTo, viridis, type ColorRange } from "./colormap.js";
import { canvasFractionToPixel, pixelToField, pixelToStage } from "./coords.js";
import type { ScanBuffer } from "./state.js";

export interface SpotSelection {
  row: number;
  col: number;
  stageUm: [number, number];
  fieldUm: [number, number];
  counts: number | null;
}

export class Heatmap {
  private ctx: CanvasRenderingContext2D | null;
  private buffer: ScanBuffer | null = null;
  private manualRange: ColorRange | null = null;
  private marker: [number, number] | null = null; // row, col
  onSelect: ((sel: SpotSelection) => void) | null = null;

  constructor(public canvas: HTMLCanvasElement) {
    this.ctx = canvas.getContext("2d");
    canvas.addEventListener("click", (ev) => this.handleClick(ev));
  }

  setData(buffer: ScanBuffer | null): void {
    this.buffer = buffer;
    this.draw();
  }

  setManualRange(range: ColorRange | null): void {
    this.manualRange = range;
    this.draw();
  }

  /** Map a click to pixel indices and positions; fires onSelect. */
  handleClick(ev: MouseEvent): void {
    if (!this.buffer) return;
    const rect = this.canvas.getBoundingClientRect();
    const width = rect.width || this.canvas.width;
    const height = rect.height || this.canvas.height;
    const fx = (ev.clientX - rect.left) / width;
    const fy = (ev.clientY - rect.top) / height;
    this.selectFraction(fx, fy);
  }

  selectFraction(fx: number, fy: number): void {
    if (!this.buffer) return;
    const [row, col] = canvasFractionToPixel(this.buffer.geom, fx, fy);
    this.selectPixel(row, col);
  }

  selectPixel(row: number, col: number): void {
    if (!this.buffer) return;
    this.marker = [row, col];
    const rowData = this.buffer.rows[row];
    const sel: SpotSelection = {
      row,
      col,
      stageUm: pixelToStage(this.buffer.geom, row, col),
      fieldUm: pixelToField(this.buffer.geom, row, col),
      counts: rowData ? rowData[col] : null,
    };
    this.draw();
    if (this.onSelect) this.onSelect(sel);
  }

  draw(): void {
    if (!this.ctx) return;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.buffer) return;
    const [nx, ny] = this.buffer.geom.resolution;
    const filled = this.buffer.rows.flatMap((r) => (r === null ? [] : r));
    if (filled.length === 0) return;
    const range = autoRange(filled, this.manualRange);

    const image = ctx.createImageData(nx, ny);
    for (let row = 0; row < ny; row++) {
      const rowData = this.buffer.rows[row];
      for (let col = 0; col < nx; col++) {
        const idx = (row * nx + col) * 4;
        if (rowData === null) {
          image.data[idx + 3] = 0;
          continue;
        }
        const [r, g, b] = viridis(normalizeTo(range, rowData[col]));
        image.data[idx] = r;
        image.data[idx + 1] = g;
        image.data[idx + 2] = b;
        image.data[idx + 3] = 255;
      }
    }
    // scale the nx x ny image up to the canvas via an offscreen canvas
    const off = this.canvas.ownerDocument.createElement("canvas");
    off.width = nx;
    off.height = ny;
    const offCtx = off.getContext("2d");
    if (!offCtx) return;
    offCtx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, this.canvas.width, this.canvas.height);

    if (this.marker) {
      const [row, col] = this.marker;
      const cx = ((col + 0.5) / nx) * this.canvas.width;
      const cy = ((row + 0.5) / ny) * this.canvas.height;
      ctx.strokeStyle = "#00e5ff";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(cx - 8, cy);
      ctx.lineTo(cx + 8, cy);
      ctx.moveTo(cx, cy - 8);
      ctx.lineTo(cx, cy + 8);
      ctx.stroke();
    }
  }
}
