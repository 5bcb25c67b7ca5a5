import { describe, expect, it } from "vitest";

import { decodeState, defaultState, encodeState, ViewState, windowsValid } from "../src/state";

function sampleState(): ViewState {
  return {
    center: [501280.5, 4648720.25],
    zoom: 2,
    reference: ["2022-03-01", "2023-02-27"],
    inference: ["2023-03-15", "2023-05-14"],
    threshold: 3.1459,
    jobId: "426f9a91be24",
    layers: { damage: true, buildings: true, events: false, population: true },
  };
}

describe("URL state round trip", () => {
  it("restores an identical view state", () => {
    const state = sampleState();
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("round-trips with a leading hash and no job id", () => {
    const state = { ...sampleState(), jobId: null };
    expect(decodeState("#" + encodeState(state))).toEqual(state);
  });

  it("preserves full float precision of center and threshold", () => {
    const state = sampleState();
    state.center = [500000.0000001, 4650000.1234567];
    state.threshold = 2.7182818284590451;
    const back = decodeState(encodeState(state));
    expect(back.center[0]).toBe(state.center[0]);
    expect(back.center[1]).toBe(state.center[1]);
    expect(back.threshold).toBe(state.threshold);
  });

  it("round-trips every layer combination", () => {
    for (let bits = 0; bits < 16; bits++) {
      const state = sampleState();
      state.layers = {
        damage: Boolean(bits & 1),
        buildings: Boolean(bits & 2),
        events: Boolean(bits & 4),
        population: Boolean(bits & 8),
      };
      expect(decodeState(encodeState(state)).layers).toEqual(state.layers);
    }
  });

  it("falls back to the base state for missing keys", () => {
    const base = sampleState();
    const decoded = decodeState("z=1", base);
    expect(decoded.zoom).toBe(1);
    expect(decoded.reference).toEqual(base.reference);
    expect(decoded.center).toEqual(base.center);
  });

  it("ignores malformed numbers", () => {
    const base = sampleState();
    const decoded = decodeState("c=oops,4&t=nope", base);
    expect(decoded.center).toEqual(base.center);
    expect(decoded.threshold).toBe(base.threshold);
  });
});

describe("window ordering", () => {
  it("accepts reference strictly before inference", () => {
    expect(windowsValid(sampleState())).toBe(true);
  });

  it("accepts reference ending exactly at the inference start", () => {
    const state = sampleState();
    state.inference = ["2023-02-27", "2023-04-27"];
    expect(windowsValid(state)).toBe(true);
  });

  it("rejects overlap, empty intervals, and missing dates", () => {
    const overlap = sampleState();
    overlap.inference = ["2023-01-01", "2023-03-01"];
    expect(windowsValid(overlap)).toBe(false);

    const empty = sampleState();
    empty.reference = ["2022-03-01", "2022-03-01"];
    expect(windowsValid(empty)).toBe(false);

    expect(windowsValid(defaultState())).toBe(false);
  });
});
