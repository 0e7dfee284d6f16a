import { describe, expect, it } from "vitest";

import {
  applyQueue,
  classOptions,
  emptyState,
  removeAndAdvance,
  select,
  setClassFilter,
  visibleItems,
} from "../src/state";
import type { ReviewItemJson } from "../src/types";

function item(id: string, cls: string): ReviewItemJson {
  return {
    id,
    detection: { id: `det-${id}`, class: cls, values: [], confidence: 0.5, source: "model" },
    status: "pending",
    relabel: null,
    created_at: 0,
    decided_at: null,
    reviewer: null,
  };
}

const ITEMS = [item("a", "lane_marking"), item("b", "pole"), item("c", "lane_marking")];

describe("applyQueue", () => {
  it("selects the first visible item initially", () => {
    const s = applyQueue(emptyState(), ITEMS);
    expect(s.selectedId).toBe("a");
  });

  it("keeps an existing selection that is still visible", () => {
    let s = applyQueue(emptyState(), ITEMS);
    s = select(s, "b");
    s = applyQueue(s, ITEMS);
    expect(s.selectedId).toBe("b");
  });

  it("re-selects when the old selection disappeared", () => {
    let s = applyQueue(emptyState(), ITEMS);
    s = select(s, "b");
    s = applyQueue(s, [item("c", "lane_marking")]);
    expect(s.selectedId).toBe("c");
  });

  it("is a pure projection: same responses, same state", () => {
    const a = applyQueue(emptyState(), ITEMS);
    const b = applyQueue(emptyState(), ITEMS);
    expect(a).toEqual(b);
  });
});

describe("filters", () => {
  it("filters by class and lists options", () => {
    let s = applyQueue(emptyState(), ITEMS);
    expect(classOptions(s)).toEqual(["lane_marking", "pole"]);
    s = setClassFilter(s, "pole");
    expect(visibleItems(s).map((i) => i.id)).toEqual(["b"]);
    expect(s.selectedId).toBe("b");
  });
});

describe("removeAndAdvance", () => {
  it("advances to the next visible item", () => {
    const s = applyQueue(emptyState(), ITEMS);
    const next = removeAndAdvance(s, "a");
    expect(next.items.map((i) => i.id)).toEqual(["b", "c"]);
    expect(next.selectedId).toBe("b");
  });

  it("wraps back at the end of the list", () => {
    let s = applyQueue(emptyState(), ITEMS);
    s = select(s, "c");
    const next = removeAndAdvance(s, "c");
    expect(next.selectedId).toBe("b");
  });

  it("clears the selection when the queue empties", () => {
    const s = applyQueue(emptyState(), [item("only", "pole")]);
    expect(removeAndAdvance(s, "only").selectedId).toBeNull();
  });

  it("keeps an unrelated selection", () => {
    let s = applyQueue(emptyState(), ITEMS);
    s = select(s, "c");
    expect(removeAndAdvance(s, "a").selectedId).toBe("c");
  });
});
