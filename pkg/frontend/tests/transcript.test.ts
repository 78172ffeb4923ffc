// The message fold: display text must equal the concatenated deltas,
// with citations and figures slotted between them in arrival order.

import { describe, expect, it } from "vitest";
import { applyEvent, emptyMessage, transcriptText } from "../src/transcript";
import type { StreamEvent } from "../src/api";

function fold(events: StreamEvent[]) {
  const message = emptyMessage();
  for (const event of events) applyEvent(message, event);
  return message;
}

describe("applyEvent", () => {
  it("keeps the transcript text equal to the concatenated deltas", () => {
    const deltas = ["Mitochondria ", "convert sugars ", "", "into ATP."];
    const message = fold([
      { type: "Status", phase: "answering" },
      { type: "TextDelta", text: deltas[0] },
      { type: "TextDelta", text: deltas[1] },
      { type: "Citation", doc_id: "bio", block_ids: [2] },
      { type: "TextDelta", text: deltas[2] },
      { type: "TextDelta", text: deltas[3] },
      { type: "Done" },
    ]);
    expect(transcriptText(message)).toBe(deltas.join(""));
  });

  it("merges consecutive deltas into one part", () => {
    const message = fold([
      { type: "TextDelta", text: "a" },
      { type: "TextDelta", text: "b" },
      { type: "TextDelta", text: "c" },
    ]);
    expect(message.parts).toEqual([{ kind: "text", text: "abc" }]);
  });

  it("keeps parts in arrival order", () => {
    const message = fold([
      { type: "TextDelta", text: "see " },
      { type: "Citation", doc_id: "bio", block_ids: [0, 1] },
      { type: "TextDelta", text: " and " },
      { type: "Figure", doc_id: "bio", block_id: 4, caption: "flow" },
      { type: "TextDelta", text: " above." },
    ]);
    expect(message.parts.map((p) => p.kind)).toEqual([
      "text",
      "citation",
      "text",
      "figure",
      "text",
    ]);
    expect(message.parts[1]).toEqual({ kind: "citation", docId: "bio", blockIds: [0, 1] });
    expect(message.parts[3]).toEqual({
      kind: "figure",
      docId: "bio",
      blockId: 4,
      caption: "flow",
    });
  });

  it("tracks the activity phase and clears it when the turn ends", () => {
    const message = emptyMessage();
    applyEvent(message, { type: "Status", phase: "searching" });
    expect(message.status).toBe("searching");
    applyEvent(message, { type: "Status", phase: "answering" });
    expect(message.status).toBe("answering");
    applyEvent(message, { type: "Done" });
    expect(message.status).toBeNull();
    expect(message.done).toBe(true);
  });

  it("records errors and clears the phase", () => {
    const message = emptyMessage();
    applyEvent(message, { type: "Status", phase: "searching" });
    applyEvent(message, { type: "Error", message: "agent failed" });
    expect(message.error).toBe("agent failed");
    expect(message.status).toBeNull();
    expect(message.done).toBe(false);
  });

  it("collects trace iterations in order", () => {
    const message = fold([
      { type: "TraceAvailable", iteration: 1 },
      { type: "TraceAvailable", iteration: 2 },
      { type: "TraceAvailable", iteration: 3 },
    ]);
    expect(message.traceIterations).toEqual([1, 2, 3]);
  });
});
