// Pure view-model builders for the side panels. The DOM layer renders these
// verbatim; keeping them as data makes the display contract testable.

import { ApiClient, PrCurve } from "./api";
import { formatPrecision, isOptimalThreshold, precisionAt } from "./legend";

export interface ExposureView {
  visible: boolean;
  text: string;
  people: number | null;
}

/** The exposure panel mirrors /v1/exposure: hidden when the service has no
 * population layer, otherwise the API's number verbatim. */
export async function exposureView(api: ApiClient, jobId: string, threshold: number): Promise<ExposureView> {
  const result = await api.exposure(jobId, threshold);
  if (!result.available) {
    return { visible: false, text: "", people: null };
  }
  const people = result.people ?? 0;
  return {
    visible: true,
    people,
    text: `${people.toLocaleString("en-US", { maximumFractionDigits: 0 })} people in the damage mask`,
  };
}

export interface ThresholdReadout {
  precisionText: string;
  precision: number | null;
  optimalTick: boolean;
}

/** The slider's readout: precision at the current threshold, straight off
 * the PR curve, plus whether we sit on the F1-optimal knot. */
export function thresholdReadout(curve: PrCurve, threshold: number): ThresholdReadout {
  const precision = precisionAt(curve, threshold);
  return {
    precisionText: formatPrecision(precision),
    precision,
    optimalTick: isOptimalThreshold(curve, threshold),
  };
}

export interface JobProgressView {
  text: string;
  busy: boolean;
}

export function jobProgressView(status: string | null): JobProgressView {
  if (status === null) return { text: "", busy: false };
  if (status === "queued" || status === "running") return { text: `computing (${status})`, busy: true };
  if (status === "error") return { text: "compute failed", busy: false };
  return { text: "up to date", busy: false };
}
