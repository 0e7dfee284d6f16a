// Queue view state as pure functions over API responses: reloading the page
// and replaying the same responses reconstructs the identical state.

import type { ReviewItemJson } from "./types";

export interface Banner {
  kind: "info" | "error" | "conflict";
  text: string;
}

export interface QueueState {
  items: ReviewItemJson[];
  selectedId: string | null;
  classFilter: string; // "all" or an object class
}

export function emptyState(): QueueState {
  return { items: [], selectedId: null, classFilter: "all" };
}

export function itemClass(item: ReviewItemJson): string {
  return item.detection.class;
}

export function visibleItems(state: QueueState): ReviewItemJson[] {
  if (state.classFilter === "all") return state.items;
  return state.items.filter((i) => itemClass(i) === state.classFilter);
}

export function classOptions(state: QueueState): string[] {
  return [...new Set(state.items.map(itemClass))].sort();
}

/** Replace the item list, keeping the selection when it still exists. */
export function applyQueue(state: QueueState, items: ReviewItemJson[]): QueueState {
  const next = { ...state, items };
  const vis = visibleItems(next);
  if (!vis.some((i) => i.id === state.selectedId)) {
    next.selectedId = vis.length > 0 ? vis[0]!.id : null;
  }
  return next;
}

export function select(state: QueueState, id: string | null): QueueState {
  return { ...state, selectedId: id };
}

export function setClassFilter(state: QueueState, filter: string): QueueState {
  return applyQueue({ ...state, classFilter: filter }, state.items);
}

/**
 * Remove a decided item from the pending view and advance the selection to
 * the next visible item (wrapping to the previous one at the end).
 */
export function removeAndAdvance(state: QueueState, id: string): QueueState {
  const vis = visibleItems(state);
  const idx = vis.findIndex((i) => i.id === id);
  const items = state.items.filter((i) => i.id !== id);
  const next = { ...state, items };
  const remaining = visibleItems(next);
  if (state.selectedId !== id) return next;
  if (remaining.length === 0) return { ...next, selectedId: null };
  const at = Math.min(Math.max(idx, 0), remaining.length - 1);
  return { ...next, selectedId: remaining[at]!.id };
}
