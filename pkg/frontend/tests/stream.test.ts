// SSE frame parsing: every event variant, arbitrary chunk boundaries,
// and graceful handling of unknown or malformed frames.

import { describe, expect, it } from "vitest";
import { parseSseFrame, SseParser, type StreamEvent } from "../src/api";

function frame(name: string, data: unknown): string {
  return `event: ${name}\ndata: ${JSON.stringify(data)}\n\n`;
}

const WIRE =
  frame("Status", { phase: "searching" }) +
  frame("TraceAvailable", { iteration: 1 }) +
  frame("TextDelta", { text: "The cell " }) +
  frame("TextDelta", { text: "stores energy." }) +
  frame("Citation", { doc_id: "bio", block_ids: [0, 1] }) +
  frame("Figure", { doc_id: "bio", block_id: 4, caption: "Energy flow" }) +
  frame("Done", {});

const EXPECTED: StreamEvent[] = [
  { type: "Status", phase: "searching" },
  { type: "TraceAvailable", iteration: 1 },
  { type: "TextDelta", text: "The cell " },
  { type: "TextDelta", text: "stores energy." },
  { type: "Citation", doc_id: "bio", block_ids: [0, 1] },
  { type: "Figure", doc_id: "bio", block_id: 4, caption: "Energy flow" },
  { type: "Done" },
];

describe("SseParser", () => {
  it("parses a whole stream fed at once", () => {
    const parser = new SseParser();
    expect(parser.feed(WIRE)).toEqual(EXPECTED);
  });

  it("reassembles frames split at every byte", () => {
    const parser = new SseParser();
    const events: StreamEvent[] = [];
    for (const char of WIRE) events.push(...parser.feed(char));
    expect(events).toEqual(EXPECTED);
  });

  it("buffers a trailing partial frame until it completes", () => {
    const parser = new SseParser();
    const first = frame("Status", { phase: "answering" });
    const second = frame("Done", {});
    const cut = first.length + 9; // nine bytes into the second frame
    const wire = first + second;
    expect(parser.feed(wire.slice(0, cut))).toEqual([
      { type: "Status", phase: "answering" },
    ]);
    expect(parser.feed(wire.slice(cut))).toEqual([{ type: "Done" }]);
  });

  it("skips frames with unknown event names", () => {
    const parser = new SseParser();
    const wire = frame("Telemetry", { x: 1 }) + frame("Done", {});
    expect(parser.feed(wire)).toEqual([{ type: "Done" }]);
  });
});

describe("parseSseFrame", () => {
  it("turns malformed payloads into error events", () => {
    const event = parseSseFrame("event: TextDelta\ndata: {broken");
    expect(event).toEqual({ type: "Error", message: "malformed frame for TextDelta" });
  });

  it("parses error frames", () => {
    const event = parseSseFrame('event: Error\ndata: {"message": "agent gave up"}');
    expect(event).toEqual({ type: "Error", message: "agent gave up" });
  });

  it("ignores frames without an event name", () => {
    expect(parseSseFrame('data: {"text": "x"}')).toBeNull();
  });

  it("exposes only the iteration number on trace frames", () => {
    const event = parseSseFrame('event: TraceAvailable\ndata: {"iteration": 3}');
    expect(event).toEqual({ type: "TraceAvailable", iteration: 3 });
  });
});
