// Precision legend: maps a threshold to the precision the server reported
// for it. The lookup picks the highest PR knot at or below the threshold —
// the same step convention the tile colorizer uses — so a slider sitting on
// a knot displays exactly that knot's precision.

import type { PrCurve, PrPoint } from "./api";

function knotValue(point: PrPoint): number {
  return point.threshold === null ? Number.NEGATIVE_INFINITY : point.threshold;
}

/** Precision at a threshold, or null when no classification exists there
 * (threshold above every knot: zero predicted positives, shown as "n/a"). */
export function precisionAt(curve: PrCurve, threshold: number): number | null {
  let best: PrPoint | null = null;
  let bestValue = Number.NEGATIVE_INFINITY;
  let maxValue = Number.NEGATIVE_INFINITY;
  for (const point of curve.points) {
    const value = knotValue(point);
    maxValue = Math.max(maxValue, value);
    if (value <= threshold && value >= bestValue) {
      best = point;
      bestValue = value;
    }
  }
  if (best === null) return null;
  if (threshold > maxValue && maxValue < Number.POSITIVE_INFINITY) {
    // above the top knot nothing is predicted damaged anymore
    const finiteKnots = curve.points.filter((p) => p.threshold !== null);
    const top = Math.max(...finiteKnots.map((p) => p.threshold as number));
    if (threshold > top) return null;
  }
  return best.precision;
}

export function formatPrecision(precision: number | null): string {
  return precision === null ? "n/a" : `${Math.round(precision * 100)}%`;
}

/** True when the slider sits on the server's F1-optimal knot (the legend
 * draws a tick there). */
export function isOptimalThreshold(curve: PrCurve, threshold: number): boolean {
  return curve.optimal_threshold !== null && threshold === curve.optimal_threshold;
}

export interface LegendBand {
  minPrecision: number;
  color: string;
}

/** Color bands mirror the server's tile ramp (low to high confidence). */
export const LEGEND_BANDS: LegendBand[] = [
  { minPrecision: 0.0, color: "#ffffb2" },
  { minPrecision: 0.45, color: "#fecc5c" },
  { minPrecision: 0.6, color: "#fd8d3c" },
  { minPrecision: 0.75, color: "#f03b20" },
  { minPrecision: 0.83, color: "#7a0177" },
];

export function bandFor(precision: number): LegendBand {
  let chosen = LEGEND_BANDS[0] as LegendBand;
  for (const band of LEGEND_BANDS) {
    if (precision >= band.minPrecision) chosen = band;
  }
  return chosen;
}
