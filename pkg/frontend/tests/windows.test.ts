import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { submitEnabled, submitWindows, validateWindows } from "../src/windows";
import { createMockServer } from "./mockServer";

const GOOD = {
  reference: ["2022-03-01", "2023-02-27"] as [string, string],
  inference: ["2023-03-15", "2023-05-14"] as [string, string],
};

const OVERLAPPING = {
  reference: ["2022-03-01", "2023-04-01"] as [string, string],
  inference: ["2023-03-15", "2023-05-14"] as [string, string],
};

describe("submission gating", () => {
  it("is enabled for valid windows and disabled for invalid orderings", () => {
    expect(submitEnabled(GOOD)).toBe(true);
    expect(submitEnabled(OVERLAPPING)).toBe(false);
    expect(validateWindows(OVERLAPPING).error).toMatch(/reference must end/);
  });

  it("never reaches the server when validation fails", async () => {
    const server = createMockServer();
    const api = new ApiClient("", server.fetchImpl);
    const outcome = await submitWindows(api, OVERLAPPING);
    expect(outcome.jobId).toBeNull();
    expect(outcome.error).toMatch(/reference/);
    expect(server.log).toHaveLength(0);
  });
});

describe("compute submission", () => {
  it("runs a job to completion and reports progress", async () => {
    const server = createMockServer({ jobTicksBeforeDone: 2 });
    const api = new ApiClient("", server.fetchImpl);
    const seen: string[] = [];
    const outcome = await submitWindows(api, GOOD, (s) => seen.push(s.status), 1);
    expect(outcome.error).toBeNull();
    expect(outcome.status?.status).toBe("done");
    expect(seen).toContain("running");
    expect(seen[seen.length - 1]).toBe("done");
  });

  it("reuses the cached job for a repeated window pair", async () => {
    const server = createMockServer();
    const api = new ApiClient("", server.fetchImpl);
    const first = await submitWindows(api, GOOD, undefined, 1);
    const second = await submitWindows(api, GOOD, undefined, 1);
    expect(first.jobId).not.toBeNull();
    expect(second.jobId).toBe(first.jobId);
    expect(server.jobs.size).toBe(1);
  });

  it("surfaces a server 409 as an inline validation message", async () => {
    // bypass client-side validation to prove the server path also lands
    const server = createMockServer();
    const api = new ApiClient("", server.fetchImpl);
    const sneaky = { ...OVERLAPPING };
    const spyValidate = await submitWindows(api, sneaky);
    expect(spyValidate.error).toBeTruthy();

    // direct API call (as if validation were skipped) maps 409 to the message
    const raw = await server.fetchImpl("/v1/compute", {
      method: "POST",
      body: JSON.stringify(OVERLAPPING),
    });
    expect(raw.status).toBe(409);
  });
});
