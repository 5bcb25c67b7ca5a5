import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { exposureView } from "../src/panels";
import { createMockServer } from "./mockServer";

describe("exposure panel", () => {
  it("is hidden when the service has no population layer", async () => {
    const server = createMockServer({ populationAvailable: false });
    const api = new ApiClient("", server.fetchImpl);
    const view = await exposureView(api, "job-x", 3.0);
    expect(view.visible).toBe(false);
  });

  it("shows the API value verbatim", async () => {
    const server = createMockServer();
    const api = new ApiClient("", server.fetchImpl);
    const raw = await api.exposure("job-x", 3.0);
    const view = await exposureView(api, "job-x", 3.0);
    expect(view.visible).toBe(true);
    expect(view.people).toBe(raw.people);
    expect(view.text).toContain(
      (raw.people ?? -1).toLocaleString("en-US", { maximumFractionDigits: 0 }),
    );
  });

  it("displays a larger count when the threshold is lowered", async () => {
    const server = createMockServer();
    const api = new ApiClient("", server.fetchImpl);
    const high = await exposureView(api, "job-x", 4.0);
    const low = await exposureView(api, "job-x", 1.0);
    expect(low.people!).toBeGreaterThanOrEqual(high.people!);
    // and both match what the API itself returns for those thresholds
    expect(low.people).toBe((await api.exposure("job-x", 1.0)).people);
    expect(high.people).toBe((await api.exposure("job-x", 4.0)).people);
  });
});
