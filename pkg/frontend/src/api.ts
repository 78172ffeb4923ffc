// Typed client for the study service HTTP/SSE API.

export type ConditionName = "mudoc" | "texdoc" | "docsearch";

export interface SessionInfo {
  session_id: string;
  condition: ConditionName;
  created_at_ms: number;
}

export interface BlockInfo {
  doc_id: string;
  block_id: number;
  page: number;
  bbox: number[];
  kind: "text" | "figure";
  text?: string;
  caption?: string;
  description?: string;
  image_b64?: string;
}

export interface SearchResult {
  rank: number;
  doc_id: string;
  block_id: number;
  kind: string;
  page: number;
  bbox: number[];
  snippet: string;
}

export interface TimingState {
  active_ms: number;
  min_ms: number;
  max_ms: number;
  can_advance: boolean;
  must_advance: boolean;
}

export type StreamEvent =
  | { type: "Status"; phase: string }
  | { type: "TraceAvailable"; iteration: number }
  | { type: "TextDelta"; text: string }
  | { type: "Citation"; doc_id: string; block_ids: number[] }
  | { type: "Figure"; doc_id: string; block_id: number; caption: string }
  | { type: "Error"; message: string }
  | { type: "Done" };

export type ClientEvent =
  | { type: "tab_switch"; tab: "objectives" | "chat" | "document" }
  | { type: "citation_click"; doc_id: string; block_ids: number[] };

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    message: string,
  ) {
    super(message);
  }
}

/** What the UI needs from the service; ApiClient is the HTTP implementation. */
export interface StudyApi {
  createSession(condition: ConditionName): Promise<SessionInfo>;
  search(sessionId: string, query: string): Promise<SearchResult[]>;
  getNotes(sessionId: string): Promise<string>;
  putNotes(sessionId: string, text: string): Promise<{ note_edit_count: number }>;
  heartbeat(sessionId: string): Promise<{ active_ms: number }>;
  logEvent(sessionId: string, event: ClientEvent): Promise<void>;
  timing(sessionId: string): Promise<TimingState>;
  blockInfo(docId: string, blockId: number): Promise<BlockInfo>;
  turnTrace(sessionId: string, turn: number): Promise<{ turn: number; traces: object[] }>;
  pageImageUrl(docId: string, page: number): string;
  chat(sessionId: string, message: string): AsyncGenerator<StreamEvent>;
}

async function toApiError(response: Response): Promise<ApiError> {
  let errorType = "HttpError";
  let message = `${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") errorType = body.error;
    if (body && typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; status alone will do
  }
  return new ApiError(response.status, errorType, message);
}

export class ApiClient implements StudyApi {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as T;
  }

  createSession(condition: ConditionName): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { condition });
  }

  search(sessionId: string, query: string): Promise<SearchResult[]> {
    return this.request<{ results: SearchResult[] }>(
      "POST",
      `/sessions/${sessionId}/search`,
      { query },
    ).then((body) => body.results);
  }

  getNotes(sessionId: string): Promise<string> {
    return this.request<{ text: string }>("GET", `/sessions/${sessionId}/notes`).then(
      (body) => body.text,
    );
  }

  putNotes(sessionId: string, text: string): Promise<{ note_edit_count: number }> {
    return this.request("PUT", `/sessions/${sessionId}/notes`, { text });
  }

  heartbeat(sessionId: string): Promise<{ active_ms: number }> {
    return this.request("POST", `/sessions/${sessionId}/heartbeat`);
  }

  logEvent(sessionId: string, event: ClientEvent): Promise<void> {
    return this.request("POST", `/sessions/${sessionId}/events`, event).then(() => undefined);
  }

  timing(sessionId: string): Promise<TimingState> {
    return this.request("GET", `/sessions/${sessionId}/timing`);
  }

  blockInfo(docId: string, blockId: number): Promise<BlockInfo> {
    return this.request("GET", `/docs/${docId}/blocks/${blockId}`);
  }

  turnTrace(sessionId: string, turn: number): Promise<{ turn: number; traces: object[] }> {
    return this.request("GET", `/sessions/${sessionId}/turns/${turn}/trace`);
  }

  pageImageUrl(docId: string, page: number): string {
    return `${this.baseUrl}/docs/${docId}/pages/${page}`;
  }

  /** POST a chat message and yield stream events as SSE frames arrive. */
  async *chat(sessionId: string, message: string): AsyncGenerator<StreamEvent> {
    const response = await this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ message }),
    });
    if (!response.ok) throw await toApiError(response);
    if (!response.body) throw new ApiError(0, "StreamError", "response has no body");

    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    while (true) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
        yield event;
      }
    }
    yield* parser.feed(decoder.decode());
  }
}

/** Incremental SSE parser; frames may arrive split across chunks. */
export class SseParser {
  private buffer = "";

  feed(chunk: string): StreamEvent[] {
    this.buffer += chunk;
    const events: StreamEvent[] = [];
    let boundary: number;
    while ((boundary = this.buffer.indexOf("\n\n")) !== -1) {
      const frame = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const event = parseSseFrame(frame);
      if (event) events.push(event);
    }
    return events;
  }
}

export function parseSseFrame(frame: string): StreamEvent | null {
  let name = "";
  let data = "";
  for (const line of frame.split("\n")) {
    if (line.startsWith("event: ")) name = line.slice(7);
    else if (line.startsWith("data: ")) data = line.slice(6);
  }
  if (!name) return null;
  let payload: Record<string, unknown>;
  try {
    payload = data ? JSON.parse(data) : {};
  } catch {
    return { type: "Error", message: `malformed frame for ${name}` };
  }
  switch (name) {
    case "Status":
      return { type: "Status", phase: String(payload.phase ?? "") };
    case "TraceAvailable":
      return { type: "TraceAvailable", iteration: Number(payload.iteration ?? 0) };
    case "TextDelta":
      return { type: "TextDelta", text: String(payload.text ?? "") };
    case "Citation":
      return {
        type: "Citation",
        doc_id: String(payload.doc_id ?? ""),
        block_ids: (payload.block_ids as number[]) ?? [],
      };
    case "Figure":
      return {
        type: "Figure",
        doc_id: String(payload.doc_id ?? ""),
        block_id: Number(payload.block_id ?? 0),
        caption: String(payload.caption ?? ""),
      };
    case "Error":
      return { type: "Error", message: String(payload.message ?? "") };
    case "Done":
      return { type: "Done" };
    default:
      return null;
  }
}
