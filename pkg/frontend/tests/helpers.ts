// Shared test fakes: an in-memory StudyApi plus small async utilities.

import { vi } from "vitest";
import {
  ApiError,
  type BlockInfo,
  type ClientEvent,
  type ConditionName,
  type SearchResult,
  type SessionInfo,
  type StreamEvent,
  type StudyApi,
  type TimingState,
} from "../src/api";

export function makeBlock(docId: string, blockId: number, over: Partial<BlockInfo> = {}): BlockInfo {
  return {
    doc_id: docId,
    block_id: blockId,
    page: 1,
    bbox: [0.1, 0.2, 0.3, 0.1],
    kind: "text",
    text: "block text",
    ...over,
  };
}

export function makeResult(rank: number, over: Partial<SearchResult> = {}): SearchResult {
  return {
    rank,
    doc_id: "bio",
    block_id: rank - 1,
    kind: "text",
    page: rank,
    bbox: [0.1, 0.1, 0.5, 0.1],
    snippet: `match ${rank}`,
    ...over,
  };
}

export function makeSession(condition: ConditionName): SessionInfo {
  return { session_id: "s1", condition, created_at_ms: 0 };
}

export class FakeApi implements StudyApi {
  chatScripts: StreamEvent[][] = [];
  chatCalls: Array<{ sessionId: string; message: string }> = [];
  /** When set, the fake stream pauses before its final event. */
  holdBeforeLast: Promise<void> | null = null;
  blocks = new Map<string, BlockInfo>();
  results: SearchResult[] = [];
  notes = "";
  timingState: TimingState = {
    active_ms: 0,
    min_ms: 900_000,
    max_ms: 1_500_000,
    can_advance: false,
    must_advance: false,
  };
  traces: object[] = [{ action: "initial_search", query: "energy" }];

  addBlock(block: BlockInfo): void {
    this.blocks.set(`${block.doc_id}:${block.block_id}`, block);
  }

  createSession = vi.fn(
    async (condition: ConditionName): Promise<SessionInfo> => makeSession(condition),
  );

  search = vi.fn(async (_sessionId: string, _query: string): Promise<SearchResult[]> => {
    return this.results;
  });

  getNotes = vi.fn(async (_sessionId: string): Promise<string> => this.notes);

  putNotes = vi.fn(async (_sessionId: string, text: string): Promise<{ note_edit_count: number }> => {
    this.notes = text;
    return { note_edit_count: 1 };
  });

  heartbeat = vi.fn(async (_sessionId: string): Promise<{ active_ms: number }> => {
    return { active_ms: this.timingState.active_ms };
  });

  logEvent = vi.fn(async (_sessionId: string, _event: ClientEvent): Promise<void> => undefined);

  timing = vi.fn(async (_sessionId: string): Promise<TimingState> => this.timingState);

  blockInfo = vi.fn(async (docId: string, blockId: number): Promise<BlockInfo> => {
    const found = this.blocks.get(`${docId}:${blockId}`);
    if (!found) throw new ApiError(404, "NotFoundError", `no block ${docId}:${blockId}`);
    return found;
  });

  turnTrace = vi.fn(async (_sessionId: string, turn: number): Promise<{ turn: number; traces: object[] }> => {
    return { turn, traces: this.traces };
  });

  pageImageUrl(docId: string, page: number): string {
    return `/docs/${docId}/pages/${page}`;
  }

  async *chat(sessionId: string, message: string): AsyncGenerator<StreamEvent> {
    this.chatCalls.push({ sessionId, message });
    const script = this.chatScripts.shift();
    if (!script) throw new Error("no chat script queued");
    for (const [i, event] of script.entries()) {
      if (i === script.length - 1 && this.holdBeforeLast) await this.holdBeforeLast;
      yield event;
    }
  }
}

/** Drain pending microtasks so fire-and-forget promises settle. */
export async function flushAsync(rounds = 4): Promise<void> {
  for (let i = 0; i < rounds; i++) await Promise.resolve();
}

export function deferred(): { promise: Promise<void>; resolve: () => void } {
  let resolve!: () => void;
  const promise = new Promise<void>((r) => {
    resolve = r;
  });
  return { promise, resolve };
}

/** jsdom has no scrollIntoView; install a spy so navigation is observable. */
export function installScrollSpy(): ReturnType<typeof vi.fn> {
  const spy = vi.fn();
  HTMLElement.prototype.scrollIntoView = spy;
  return spy;
}
