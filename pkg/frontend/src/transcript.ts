// Folds stream events into a chat message model. Rendering reads this
// model; the text invariant (display text == concatenated deltas) is
// a property of the fold, not of the DOM.

import type { StreamEvent } from "./api";

export type MessagePart =
  | { kind: "text"; text: string }
  | { kind: "citation"; docId: string; blockIds: number[] }
  | { kind: "figure"; docId: string; blockId: number; caption: string };

export interface AgentMessage {
  parts: MessagePart[];
  traceIterations: number[];
  status: string | null; // activity indicator while the turn runs
  error: string | null;
  done: boolean;
}

export function emptyMessage(): AgentMessage {
  return { parts: [], traceIterations: [], status: null, error: null, done: false };
}

export function applyEvent(message: AgentMessage, event: StreamEvent): void {
  switch (event.type) {
    case "TextDelta": {
      const last = message.parts[message.parts.length - 1];
      if (last && last.kind === "text") last.text += event.text;
      else message.parts.push({ kind: "text", text: event.text });
      return;
    }
    case "Citation":
      message.parts.push({
        kind: "citation",
        docId: event.doc_id,
        blockIds: [...event.block_ids],
      });
      return;
    case "Figure":
      message.parts.push({
        kind: "figure",
        docId: event.doc_id,
        blockId: event.block_id,
        caption: event.caption,
      });
      return;
    case "Status":
      message.status = event.phase;
      return;
    case "TraceAvailable":
      message.traceIterations.push(event.iteration);
      return;
    case "Error":
      message.error = event.message;
      message.status = null;
      return;
    case "Done":
      message.done = true;
      message.status = null;
      return;
  }
}

export function transcriptText(message: AgentMessage): string {
  return message.parts
    .filter((part): part is Extract<MessagePart, { kind: "text" }> => part.kind === "text")
    .map((part) => part.text)
    .join("");
}
