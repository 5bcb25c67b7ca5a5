// Dashboard wiring: state lives in one object, every mutation re-renders and
// re-serializes to the URL, and every displayed number comes from the API.

import { ApiClient, GeoJson, Meta, PrCurve } from "./api";
import { bandFor, LEGEND_BANDS } from "./legend";
import { TileMap } from "./map";
import { exposureView, jobProgressView, thresholdReadout } from "./panels";
import { decodeState, defaultState, encodeState, ViewState } from "./state";
import { submitEnabled, submitWindows } from "./windows";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const meta: Meta = await api.meta();
  let state: ViewState = initialState(meta);
  let curve: PrCurve | null = null;
  let buildings: GeoJson | undefined;
  let events: GeoJson | undefined;
  let jobStatus: string | null = null;

  const canvas = el<HTMLCanvasElement>("map");
  const map = new TileMap(canvas, api, meta);

  const refStart = el<HTMLInputElement>("ref-start");
  const refEnd = el<HTMLInputElement>("ref-end");
  const infStart = el<HTMLInputElement>("inf-start");
  const infEnd = el<HTMLInputElement>("inf-end");
  const submit = el<HTMLButtonElement>("submit");
  const windowError = el<HTMLSpanElement>("window-error");
  const progress = el<HTMLSpanElement>("progress");
  const slider = el<HTMLInputElement>("threshold");
  const thresholdLabel = el<HTMLSpanElement>("threshold-label");
  const precisionLabel = el<HTMLSpanElement>("precision-label");
  const optimalTick = el<HTMLSpanElement>("optimal-tick");
  const exposurePanel = el<HTMLDivElement>("exposure-panel");
  const exposureText = el<HTMLSpanElement>("exposure-text");
  const legendBar = el<HTMLDivElement>("legend");

  LEGEND_BANDS.forEach((band) => {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.style.background = band.color;
    chip.title = `precision >= ${Math.round(band.minPrecision * 100)}%`;
    legendBar.appendChild(chip);
  });

  function initialState(meta: Meta): ViewState {
    const base = defaultState();
    const [xmin, ymin, xmax, ymax] = meta.extent;
    base.center = [(xmin + xmax) / 2, (ymin + ymax) / 2];
    base.zoom = meta.max_zoom;
    base.reference = meta.run_windows.reference;
    base.inference = meta.run_windows.inference;
    base.threshold = meta.run_threshold;
    return location.hash.length > 1 ? decodeState(location.hash, base) : base;
  }

  function syncControls(): void {
    refStart.value = state.reference[0].slice(0, 10);
    refEnd.value = state.reference[1].slice(0, 10);
    infStart.value = state.inference[0].slice(0, 10);
    infEnd.value = state.inference[1].slice(0, 10);
    slider.value = String(state.threshold);
    submit.disabled = !submitEnabled(state);
    windowError.textContent = submit.disabled ? "reference must precede inference" : "";
  }

  function render(): void {
    location.hash = encodeState(state);
    syncControls();
    thresholdLabel.textContent = `T > ${Number(state.threshold).toFixed(2)}`;
    if (curve) {
      const readout = thresholdReadout(curve, state.threshold);
      precisionLabel.textContent = `precision ${readout.precisionText}`;
      if (readout.precision !== null) {
        precisionLabel.style.background = bandFor(readout.precision).color;
      } else {
        precisionLabel.style.background = "transparent";
      }
      optimalTick.textContent = readout.optimalTick ? "F1-optimal" : "";
    }
    const progressView = jobProgressView(jobStatus);
    progress.textContent = progressView.text;
    map.render(
      { center: state.center, zoom: state.zoom },
      state.layers.damage ? state.jobId : null,
      state.threshold,
      state.layers.buildings ? buildings : undefined,
      state.layers.events ? events : undefined,
    );
  }

  async function refreshJobData(): Promise<void> {
    if (!state.jobId) return;
    curve = await api.prCurve(state.jobId);
    buildings = state.layers.buildings
      ? await api.buildings(state.jobId, state.threshold)
      : undefined;
    events = state.layers.events && meta.events_available ? await api.events() : undefined;
    if (meta.population_available) {
      const view = await exposureView(api, state.jobId, state.threshold);
      exposurePanel.style.display = view.visible ? "block" : "none";
      exposureText.textContent = view.text;
    } else {
      exposurePanel.style.display = "none";
    }
  }

  submit.addEventListener("click", () => {
    void (async () => {
      state.reference = [refStart.value, refEnd.value];
      state.inference = [infStart.value, infEnd.value];
      const outcome = await submitWindows(api, state, (status) => {
        jobStatus = status.status;
        render();
      });
      if (outcome.error) {
        windowError.textContent = outcome.error;
        jobStatus = outcome.status?.status ?? null;
      } else if (outcome.jobId) {
        state.jobId = outcome.jobId;
        jobStatus = "done";
        await refreshJobData();
      }
      render();
    })();
  });

  slider.addEventListener("input", () => {
    state.threshold = Number(slider.value);
    void refreshJobData().then(render);
  });

  for (const key of ["damage", "buildings", "events", "population"] as const) {
    el<HTMLInputElement>(`layer-${key}`).addEventListener("change", (event) => {
      state.layers[key] = (event.target as HTMLInputElement).checked;
      void refreshJobData().then(render);
    });
  }

  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    state.zoom = Math.max(0, Math.min(meta.max_zoom, state.zoom + (event.deltaY < 0 ? 1 : -1)));
    render();
  });

  let dragging: [number, number] | null = null;
  canvas.addEventListener("mousedown", (e) => (dragging = [e.offsetX, e.offsetY]));
  canvas.addEventListener("mouseup", () => (dragging = null));
  canvas.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    const before = map.screenToWorld({ center: state.center, zoom: state.zoom }, dragging[0], dragging[1]);
    const after = map.screenToWorld({ center: state.center, zoom: state.zoom }, e.offsetX, e.offsetY);
    state.center = [state.center[0] + before[0] - after[0], state.center[1] + before[1] - after[1]];
    dragging = [e.offsetX, e.offsetY];
    render();
  });

  slider.min = "0";
  slider.max = String(Math.ceil(meta.run_threshold * 4));
  slider.step = "0.01";

  // restore a shared view: the job id in the URL re-attaches to the cache
  if (state.jobId) {
    try {
      await refreshJobData();
      jobStatus = "done";
    } catch {
      state.jobId = null;
    }
  }
  render();
}

void boot();
