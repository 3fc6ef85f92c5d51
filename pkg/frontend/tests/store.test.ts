import { beforeEach, describe, expect, it } from "vitest";

import { OlitApi } from "../src/api";
import {
  WhatIfStore,
  clampSnap,
  clearTrackedPath,
  loadTrackedPath,
  saveTrackedPath,
} from "../src/store";
import { MockService, demoStudents, demoTree } from "./mockService";

describe("clampSnap", () => {
  it("snaps to 0.01 steps and clamps to [0, 1]", () => {
    expect(clampSnap(0.337)).toBe(0.34);
    expect(clampSnap(0.331)).toBe(0.33);
    expect(clampSnap(-0.4)).toBe(0);
    expect(clampSnap(1.7)).toBe(1);
    expect(clampSnap(0.5)).toBe(0.5);
  });
});

describe("WhatIfStore sequencing", () => {
  it("applies responses in order when they resolve in order", async () => {
    const service = new MockService({ students: demoStudents(), tree: demoTree() });
    const api = new OlitApi("http://mock", service.fetch);
    const store = new WhatIfStore(api, "s002");

    store.setOverride("Week5 Stat0", 0.5);
    await store.submit();
    expect(store.current?.predicted_grade).toBe(3);

    store.setOverride("Week5 Stat0", 0.1);
    await store.submit();
    expect(store.current?.predicted_grade).toBe(0);
  });

  it("never overwrites a newer response with a stale one", async () => {
    // first request is slow, second fast: the final state must reflect the
    // second (latest) request even though the first resolves afterwards
    const service = new MockService({
      students: demoStudents(),
      tree: demoTree(),
      latencyByCall: [40, 0],
    });
    const api = new OlitApi("http://mock", service.fetch);
    const store = new WhatIfStore(api, "s002");

    store.setOverride("Week5 Stat0", 0.5); // would predict 3
    const slow = store.submit();
    store.setOverride("Week5 Stat0", 0.05); // predicts 0
    const fast = store.submit();
    await Promise.all([slow, fast]);

    expect(store.current?.predicted_grade).toBe(0);
    expect(store.current?.overrides["Week5 Stat0"]).toBe(0.05);
    expect(store.pendingRequests).toBe(0);
  });

  it("records errors without clobbering the last good response", async () => {
    const service = new MockService({ students: demoStudents(), tree: demoTree() });
    const api = new OlitApi("http://mock", service.fetch);
    const store = new WhatIfStore(api, "s002");
    await store.submit();
    const good = store.current;

    const failing = new OlitApi("http://mock", async () =>
      new Response(JSON.stringify({ detail: "boom" }), { status: 500 }),
    );
    const store2 = new WhatIfStore(failing, "s002");
    await store2.submit();
    expect(store2.lastError).toContain("boom");
    expect(good).not.toBeNull();
  });
});

describe("tracked path storage", () => {
  beforeEach(() => {
    window.localStorage.clear();
  });

  it("round-trips a path rule per student", () => {
    const rule = {
      conditions: [
        { feature: "Week5 MP2", op: "<" as const, threshold: 0.67, satisfied: null },
      ],
      predicted_class: 4,
      support: 6,
      class_histogram: { "4": 6 },
      leaf_id: 2,
    };
    saveTrackedPath("s002", rule);
    expect(loadTrackedPath("s002")).toEqual(rule);
    expect(loadTrackedPath("s001")).toBeNull();
    clearTrackedPath("s002");
    expect(loadTrackedPath("s002")).toBeNull();
  });

  it("tolerates corrupted storage", () => {
    window.localStorage.setItem("olit.tracked.s009", "{broken");
    expect(loadTrackedPath("s009")).toBeNull();
  });
});
