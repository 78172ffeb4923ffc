// Smoke check against a running service: drives the real HTTP client
// through every endpoint the UI touches. With the mock provider the
// chat turn ends in a protocol error; the stream shape still holds.
//
//   mudoc serve --index-dir <index> --port 8766 &
//   npm run smoke

import { ApiClient, ApiError, type StreamEvent } from "../src/api";

const BASE = (globalThis as { LIVE_BASE?: string }).LIVE_BASE ?? "http://127.0.0.1:8766";

function check(label: string, ok: boolean): void {
  if (!ok) throw new Error(`FAILED: ${label}`);
  console.log(`ok: ${label}`);
}

async function main(): Promise<void> {
  const client = new ApiClient(BASE);

  const session = await client.createSession("mudoc");
  check("session created", session.session_id.length > 0 && session.condition === "mudoc");

  const gateFailure = await client
    .search(session.session_id, "energy")
    .catch((e: unknown) => e);
  check(
    "search is fenced off from the chat condition",
    gateFailure instanceof ApiError && gateFailure.status === 409,
  );

  const searchSession = await client.createSession("docsearch");
  const results = await client.search(searchSession.session_id, "energy transfer in cells");
  check(
    "search returns ranked results",
    results.length > 0 &&
      results.length <= 10 &&
      results.every((r, i) => r.rank === i + 1),
  );

  await client.putNotes(session.session_id, "smoke note");
  check("notes roundtrip", (await client.getNotes(session.session_id)) === "smoke note");

  const beat = await client.heartbeat(session.session_id);
  check("heartbeat accrues", beat.active_ms >= 0);

  const timing = await client.timing(session.session_id);
  check(
    "timing state exposed",
    typeof timing.can_advance === "boolean" && timing.max_ms > timing.min_ms,
  );

  const block = await client.blockInfo(results[0].doc_id, results[0].block_id);
  check(
    "block coordinates resolve",
    block.page === results[0].page && block.bbox.length === 4,
  );

  await client.logEvent(session.session_id, { type: "tab_switch", tab: "document" });
  check("client events accepted", true);

  const events: StreamEvent[] = [];
  for await (const event of client.chat(session.session_id, "how do cells store energy?")) {
    events.push(event);
  }
  const last = events[events.length - 1];
  check(
    "chat streams status frames",
    events.length > 0 && events[0].type === "Status",
  );
  check(
    "chat stream terminates explicitly",
    last.type === "Done" || last.type === "Error",
  );

  console.log(`\nall live checks passed against ${BASE}`);
}

void main();
