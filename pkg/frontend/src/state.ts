// View state shared across panels, plus the condition-driven tab set.

import type { ConditionName } from "./api";

export type TabName = "objectives" | "chat" | "document";

export interface Highlight {
  docId: string;
  page: number;
  bboxes: number[][];
  expiresAt: number;
}

export interface ViewState {
  activeTab: TabName;
  highlight: Highlight | null;
  searchCursor: number; // -1 when nothing selected
  notepadDraft: string;
  toast: string | null;
  streamOpen: boolean;
  advanced: boolean; // phase gate fired
}

export function initialState(): ViewState {
  return {
    activeTab: "objectives",
    highlight: null,
    searchCursor: -1,
    notepadDraft: "",
    toast: null,
    streamOpen: false,
    advanced: false,
  };
}

export function tabsFor(condition: ConditionName): TabName[] {
  return condition === "docsearch"
    ? ["objectives", "document"]
    : ["objectives", "chat", "document"];
}

export function hasChatTab(condition: ConditionName): boolean {
  return condition !== "docsearch";
}

export function hasSearchBar(condition: ConditionName): boolean {
  return condition === "docsearch";
}
