// Thin typed client over the /v1 HTTP API. Every number the dashboard shows
// comes back from these calls verbatim; nothing is recomputed client-side.

export interface Meta {
  extent: [number, number, number, number];
  crs: string;
  pixel_size: number;
  width: number;
  height: number;
  date_range: [string, string];
  strata: string[];
  cities: string[];
  run_threshold: number;
  run_windows: { reference: [string, string]; inference: [string, string] };
  tile_size: number;
  max_zoom: number;
  population_available: boolean;
  events_available: boolean;
  n_buildings: number;
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "error";
  error?: string;
  max_T?: number;
  optimal_threshold?: number | null;
}

export interface PrPoint {
  /** null encodes the all-positive knot (threshold -infinity) */
  threshold: number | null;
  precision: number;
  recall: number;
}

export interface PrCurve {
  points: PrPoint[];
  optimal_threshold: number | null;
  weighting: string;
}

export interface ExposureResult {
  available: boolean;
  people?: number;
  total_population?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  meta(): Promise<Meta> {
    return this.request<Meta>("/v1/meta");
  }

  compute(reference: [string, string], inference: [string, string]): Promise<{ job_id: string; status: string }> {
    return this.request("/v1/compute", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ reference, inference }),
    });
  }

  job(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/v1/jobs/${jobId}`);
  }

  prCurve(jobId: string): Promise<PrCurve> {
    return this.request<PrCurve>(`/v1/pr_curve?job=${encodeURIComponent(jobId)}`);
  }

  async exposure(jobId: string, threshold: number): Promise<ExposureResult> {
    try {
      const body = await this.request<{ people: number; total_population: number }>(
        `/v1/exposure?job=${encodeURIComponent(jobId)}&threshold=${threshold}`,
      );
      return { available: true, people: body.people, total_population: body.total_population };
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) return { available: false };
      throw error;
    }
  }

  buildings(jobId: string, threshold: number, bbox?: string): Promise<GeoJson> {
    const box = bbox ? `&bbox=${bbox}` : "";
    return this.request<GeoJson>(
      `/v1/buildings?job=${encodeURIComponent(jobId)}&threshold=${threshold}${box}`,
    );
  }

  events(bbox?: string): Promise<GeoJson> {
    return this.request<GeoJson>(`/v1/events${bbox ? `?bbox=${bbox}` : ""}`);
  }

  tileUrl(z: number, x: number, y: number, jobId: string, threshold: number): string {
    return `${this.base}/v1/tiles/${z}/${x}/${y}?job=${encodeURIComponent(jobId)}&threshold=${threshold}`;
  }
}

export interface GeoJson {
  type: "FeatureCollection";
  features: {
    type: "Feature";
    geometry: { type: string; coordinates: unknown };
    properties: Record<string, unknown>;
  }[];
}
