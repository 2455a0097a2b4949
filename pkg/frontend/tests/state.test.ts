import { describe, expect, it } from "vitest";

import {
  Store,
  applyHistogramSnapshot,
  applyScanRow,
  controlsEnabled,
  emptyScanBuffer,
  initialState,
  selectPosition,
} from "../src/state.js";
import type { SessionDescriptor } from "../src/api.js";

const GEOM = { extentUm: [20, 20] as [number, number], resolution: [4, 4] as [number, number] };

const SESSION: SessionDescriptor = {
  schema: "photonbench/1",
  id: "abc",
  profile: "reference",
  sample_seed: 1,
  activity: "idle",
  progress: 0,
  created_at: "2026-01-01T00:00:00Z",
  n_emitters: 3,
  field_size_um: [20, 20],
};

describe("histogram buffer", () => {
  const snap = (total: number, doneS: number) => ({
    counts: [total, 0],
    n_a: total / 2,
    n_b: total / 2,
    done_s: doneS,
    duration_s: 10,
  });

  it("accepts growing snapshots", () => {
    const first = applyHistogramSnapshot(null, snap(100, 1), 200);
    expect(first?.totalTags).toBe(100);
    const second = applyHistogramSnapshot(first, snap(250, 2), 200);
    expect(second?.totalTags).toBe(250);
  });

  it("never regresses to an older snapshot", () => {
    const current = applyHistogramSnapshot(null, snap(250, 2), 200);
    const stale = applyHistogramSnapshot(current, snap(100, 1), 200);
    expect(stale).toBeNull(); // caller keeps the newer buffer
  });

  it("equal totals are accepted (idempotent replays)", () => {
    const current = applyHistogramSnapshot(null, snap(250, 2), 200);
    const replay = applyHistogramSnapshot(current, snap(250, 2), 200);
    expect(replay?.totalTags).toBe(250);
  });
});

describe("scan buffer", () => {
  it("row application is idempotent and tracks progress monotonically", () => {
    let buffer = emptyScanBuffer(GEOM);
    buffer = applyScanRow(buffer, 0, [1, 2, 3, 4], 1);
    buffer = applyScanRow(buffer, 1, [5, 6, 7, 8], 2);
    buffer = applyScanRow(buffer, 0, [1, 2, 3, 4], 1); // replay
    expect(buffer.rows[0]).toEqual([1, 2, 3, 4]);
    expect(buffer.rows[1]).toEqual([5, 6, 7, 8]);
    expect(buffer.rowsDone).toBe(2);
  });
});

describe("view state", () => {
  it("controls enabled only with an idle session", () => {
    const state = initialState();
    expect(controlsEnabled(state)).toBe(false);
    expect(controlsEnabled({ ...state, session: SESSION })).toBe(true);
    expect(controlsEnabled({ ...state, session: SESSION, busy: true })).toBe(false);
  });

  it("selected positions stay inside the scan extent", () => {
    const state = { ...initialState(), scan: emptyScanBuffer(GEOM) };
    expect(selectPosition(state, 100, -100)).toEqual([10, -10]);
    expect(selectPosition(state, 1, 2)).toEqual([1, 2]);
  });

  it("store notifies subscribers", () => {
    const store = new Store();
    const seen: boolean[] = [];
    store.subscribe((s) => seen.push(s.busy));
    store.update({ busy: true });
    store.update({ busy: false });
    expect(seen).toEqual([true, false]);
  });
});
