import { describe, expect, it } from "vitest";

import { WindowStore, WINDOW_GUIDELINE } from "../src/windows.js";
import { buildAssignmentPayload, labelProblem, unlabeledIndices } from "../src/swatches.js";

const RESPONSE = {
  pending_id: "p1",
  seed: 3,
  k: 2,
  centroids: [
    { index: 0, lab: [90, 0, 3] as [number, number, number], srgb_hex: "#e5e3dd", count: 100, radius: 3 },
    { index: 1, lab: [15, 2, -5] as [number, number, number], srgb_hex: "#23252d", count: 40, radius: 2 },
  ],
};

describe("window lifecycle", () => {
  it("walks drawn -> clustered -> committed", () => {
    const store = new WindowStore();
    const win = store.add([10, 10, 100, 50], 2);
    expect(win.status).toBe("drawn");

    expect(store.beginClusterRequest(win.id)).toBe(true);
    store.applyClusterResponse(win.id, RESPONSE);
    expect(store.get(win.id).status).toBe("clustered");
    expect(store.get(win.id).seed).toBe(3);
    expect(store.get(win.id).cards).toHaveLength(2);

    store.get(win.id).cards.forEach((c, i) => (c.label = i === 0 ? "background" : "text"));
    expect(store.canCommit(win.id)).toBe(true);
    store.markCommitted(win.id);
    expect(store.get(win.id).status).toBe("committed");
  });

  it("allows only one in-flight cluster request per window", () => {
    const store = new WindowStore();
    const win = store.add([0, 0, 20, 20], 2);
    expect(store.beginClusterRequest(win.id)).toBe(true);
    expect(store.beginClusterRequest(win.id)).toBe(false); // already in flight
    store.applyClusterResponse(win.id, RESPONSE);
    expect(store.beginClusterRequest(win.id)).toBe(true); // re-cluster is fine
  });

  it("refuses cluster requests and commits after committing", () => {
    const store = new WindowStore();
    const win = store.add([0, 0, 20, 20], 2);
    store.beginClusterRequest(win.id);
    store.applyClusterResponse(win.id, RESPONSE);
    store.markCommitted(win.id);
    expect(store.beginClusterRequest(win.id)).toBe(false);
    expect(store.canCommit(win.id)).toBe(false); // pending consumed server-side
    expect(() => store.markCommitted(win.id)).toThrow(/committed/);
  });

  it("keeps state intact on a failed request and records the error inline", () => {
    const store = new WindowStore();
    const win = store.add([0, 0, 20, 20], 3);
    store.beginClusterRequest(win.id);
    store.applyClusterError(win.id, "service offline");
    const after = store.get(win.id);
    expect(after.status).toBe("drawn");
    expect(after.error).toBe("service offline");
    expect(store.beginClusterRequest(win.id)).toBe(true); // retry allowed
  });

  it("reports progress against the guideline", () => {
    const store = new WindowStore();
    expect(WINDOW_GUIDELINE).toBe(6);
    expect(store.progressHint()).toBe("0 of ~6 windows committed");
    const a = store.add([0, 0, 10, 10], 2);
    store.beginClusterRequest(a.id);
    store.applyClusterResponse(a.id, RESPONSE);
    store.markCommitted(a.id);
    expect(store.progressHint()).toBe("1 of ~6 windows committed");
  });
});

describe("swatch labeling rules", () => {
  it("blocks commit while any card is unlabeled", () => {
    const store = new WindowStore();
    const win = store.add([0, 0, 10, 10], 2);
    store.beginClusterRequest(win.id);
    store.applyClusterResponse(win.id, RESPONSE);
    const cards = store.get(win.id).cards;
    expect(unlabeledIndices(cards)).toEqual([0, 1]);
    cards[0].label = "background";
    expect(unlabeledIndices(cards)).toEqual([1]);
    expect(() => buildAssignmentPayload(cards)).toThrow(/swatch 1/);
  });

  it("rejects the reserved label and blank labels", () => {
    expect(labelProblem("")).toMatch(/empty/);
    expect(labelProblem("   ")).toMatch(/empty/);
    expect(labelProblem("UNKNOWN")).toMatch(/reserved/);
    expect(labelProblem("background")).toBeNull();
  });

  it("trims labels in the payload", () => {
    const store = new WindowStore();
    const win = store.add([0, 0, 10, 10], 2);
    store.beginClusterRequest(win.id);
    store.applyClusterResponse(win.id, RESPONSE);
    const cards = store.get(win.id).cards;
    cards[0].label = "  background ";
    cards[1].label = "text";
    expect(buildAssignmentPayload(cards)).toEqual({ "0": "background", "1": "text" });
  });
});
