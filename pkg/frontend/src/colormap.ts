// Perceptually uniform colormap (viridis anchor stops, linearly
// interpolated) and percentile auto-ranging for count images whose hot
// spots sit on a dim floor.

const VIRIDIS_STOPS: Array<[number, number, number]> = [
  [68, 1, 84],
  [71, 22, 105],
  [72, 40, 120],
  [69, 55, 129],
  [64, 70, 136],
  [57, 85, 140],
  [51, 98, 141],
  [45, 112, 142],
  [40, 124, 142],
  [35, 137, 142],
  [31, 150, 139],
  [32, 163, 134],
  [41, 175, 127],
  [59, 187, 114],
  [86, 198, 97],
  [116, 208, 77],
  [149, 216, 53],
  [184, 222, 41],
  [221, 227, 24],
  [253, 231, 37],
];

export function viridis(t: number): [number, number, number] {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (VIRIDIS_STOPS.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.min(lo + 1, VIRIDIS_STOPS.length - 1);
  const frac = pos - lo;
  const a = VIRIDIS_STOPS[lo];
  const b = VIRIDIS_STOPS[hi];
  return [
    Math.round(a[0] + (b[0] - a[0]) * frac),
    Math.round(a[1] + (b[1] - a[1]) * frac),
    Math.round(a[2] + (b[2] - a[2]) * frac),
  ];
}

export function percentile(values: number[], p: number): number {
  if (values.length === 0) return 0;
  const sorted = [...values].sort((a, b) => a - b);
  const idx = Math.min(sorted.length - 1, Math.max(0, (sorted.length - 1) * (p / 100)));
  const lo = Math.floor(idx);
  const hi = Math.ceil(idx);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (idx - lo);
}

export interface ColorRange {
  lo: number;
  hi: number;
  manual: boolean;
}

/** 1st..99th percentile auto-range unless a manual override is active. */
export function autoRange(values: number[], manual?: ColorRange | null): ColorRange {
  if (manual && manual.manual) return manual;
  const lo = percentile(values, 1);
  let hi = percentile(values, 99);
  if (hi <= lo) hi = lo + 1;
  return { lo, hi, manual: false };
}

export function normalizeTo(range: ColorRange, v: number): number {
  return (v - range.lo) / (range.hi - range.lo);
}
