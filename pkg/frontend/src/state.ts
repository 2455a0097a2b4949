// Console view state: a tiny observable store plus pure update helpers.
// The invariants the UI relies on live here where they are testable:
// selected positions stay inside the scan extent, and the live histogram
// buffer never regresses to an older (smaller-total) snapshot.

import type { FitReport, JobSummary, SessionDescriptor } from "./api.js";
import { clampToExtent, type ScanGeometry } from "./coords.js";

export interface ScanBuffer {
  geom: ScanGeometry;
  rows: Array<number[] | null>;
  rowsDone: number;
  complete: boolean | null; // null while running
}

export interface HistogramBuffer {
  binWidthPs: number;
  binCount: number;
  counts: number[];
  totalTags: number; // n_a + n_b of the snapshot: the monotonicity key
  doneS: number;
  durationS: number;
}

export interface Banner {
  code: string;
  message: string;
}

export interface ViewState {
  session: SessionDescriptor | null;
  busy: boolean;
  activeJob: { id: string; kind: "scanning" | "hbt" } | null;
  scan: ScanBuffer | null;
  selected: [number, number] | null; // stage um
  histogram: HistogramBuffer | null;
  fit: FitReport | null;
  banners: Banner[];
}

export function initialState(): ViewState {
  return {
    session: null,
    busy: false,
    activeJob: null,
    scan: null,
    selected: null,
    histogram: null,
    fit: null,
    banners: [],
  };
}

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }
}

export function emptyScanBuffer(geom: ScanGeometry): ScanBuffer {
  return {
    geom,
    rows: new Array(geom.resolution[1]).fill(null),
    rowsDone: 0,
    complete: null,
  };
}

/** Apply a row event; idempotent, so stream replays after reconnect are safe. */
export function applyScanRow(buffer: ScanBuffer, row: number, counts: number[],
                             rowsDone: number): ScanBuffer {
  const rows = buffer.rows.slice();
  rows[row] = counts;
  return { ...buffer, rows, rowsDone: Math.max(buffer.rowsDone, rowsDone) };
}

export function scanBufferFromResult(geom: ScanGeometry, counts: number[][],
                                     complete: boolean): ScanBuffer {
  return { geom, rows: counts, rowsDone: counts.length, complete };
}

/**
 * Merge a histogram snapshot.  Snapshots are cumulative; one that carries
 * fewer total tags than the current buffer is stale (out-of-order replay
 * after a reconnect) and is dropped, so the display never runs backwards.
 */
export function applyHistogramSnapshot(
  current: HistogramBuffer | null,
  snap: { counts: number[]; n_a: number; n_b: number; done_s: number; duration_s: number },
  binWidthPs: number,
): HistogramBuffer | null {
  const total = snap.n_a + snap.n_b;
  if (current !== null && total < current.totalTags) return null;
  return {
    binWidthPs,
    binCount: snap.counts.length,
    counts: snap.counts,
    totalTags: total,
    doneS: snap.done_s,
    durationS: snap.duration_s,
  };
}

/** Select a stage position, clamped into the scan extent. */
export function selectPosition(state: ViewState, x: number, y: number): [number, number] {
  const geom = state.scan?.geom ?? { extentUm: [20, 20] as [number, number], resolution: [100, 100] as [number, number] };
  return clampToExtent(geom, x, y);
}

export function pushBanner(state: ViewState, code: string, message: string): Banner[] {
  return [...state.banners, { code, message }];
}

export function dismissBanner(state: ViewState, index: number): Banner[] {
  return state.banners.filter((_, i) => i !== index);
}

/** Acquisition controls are enabled only when a session exists and is idle. */
export function controlsEnabled(state: ViewState): boolean {
  return state.session !== null && !state.busy;
}

export function finishJob(state: ViewState, job: JobSummary): Partial<ViewState> {
  return { busy: false, activeJob: null };
}
