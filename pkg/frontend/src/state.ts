// View state: the single source of truth for what the dashboard shows.
// Everything here is a pure function of user inputs; URL serialization makes
// any view shareable and reproducible.

export interface LayerToggles {
  damage: boolean;
  buildings: boolean;
  events: boolean;
  population: boolean;
}

export interface ViewState {
  /** map center in the artifact CRS (meters) */
  center: [number, number];
  /** tile pyramid level (0 = coarsest the server offers) */
  zoom: number;
  /** [start, end) ISO dates of the reference period */
  reference: [string, string];
  /** [start, end) ISO dates of the inference period */
  inference: [string, string];
  threshold: number;
  /** active compute job, if any */
  jobId: string | null;
  layers: LayerToggles;
}

const LAYER_CODES: [keyof LayerToggles, string][] = [
  ["damage", "d"],
  ["buildings", "b"],
  ["events", "e"],
  ["population", "p"],
];

export function defaultState(): ViewState {
  return {
    center: [0, 0],
    zoom: 0,
    reference: ["", ""],
    inference: ["", ""],
    threshold: 0,
    jobId: null,
    layers: { damage: true, buildings: false, events: false, population: false },
  };
}

/** Windows are usable when both intervals are non-empty and the reference
 * ends on or before the inference starts. Submission stays disabled until
 * this holds, mirroring the server's 409 rule. */
export function windowsValid(state: Pick<ViewState, "reference" | "inference">): boolean {
  const [r0, r1] = state.reference;
  const [i0, i1] = state.inference;
  if (!r0 || !r1 || !i0 || !i1) return false;
  return r0 < r1 && i0 < i1 && r1 <= i0;
}

export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  params.set("c", `${state.center[0]},${state.center[1]}`);
  params.set("z", String(state.zoom));
  params.set("ref", `${state.reference[0]},${state.reference[1]}`);
  params.set("inf", `${state.inference[0]},${state.inference[1]}`);
  params.set("t", String(state.threshold));
  if (state.jobId) params.set("job", state.jobId);
  const layers = LAYER_CODES.filter(([key]) => state.layers[key])
    .map(([, code]) => code)
    .join("");
  params.set("layers", layers);
  return params.toString();
}

function pair(text: string | null): [string, string] | null {
  if (text === null) return null;
  const parts = text.split(",");
  if (parts.length !== 2) return null;
  return [parts[0] ?? "", parts[1] ?? ""];
}

export function decodeState(encoded: string, base?: ViewState): ViewState {
  const state = base ? structuredClone(base) : defaultState();
  const params = new URLSearchParams(encoded.replace(/^#/, ""));
  const center = pair(params.get("c"));
  if (center) {
    const x = Number(center[0]);
    const y = Number(center[1]);
    if (Number.isFinite(x) && Number.isFinite(y)) state.center = [x, y];
  }
  const zoom = params.get("z");
  if (zoom !== null && Number.isFinite(Number(zoom))) state.zoom = Number(zoom);
  const ref = pair(params.get("ref"));
  if (ref) state.reference = ref;
  const inf = pair(params.get("inf"));
  if (inf) state.inference = inf;
  const threshold = params.get("t");
  if (threshold !== null && Number.isFinite(Number(threshold))) state.threshold = Number(threshold);
  state.jobId = params.get("job");
  const layers = params.get("layers");
  if (layers !== null) {
    for (const [key, code] of LAYER_CODES) state.layers[key] = layers.includes(code);
  }
  return state;
}
