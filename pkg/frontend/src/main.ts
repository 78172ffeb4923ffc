// Entry point: create a session for the condition in the URL and mount
// the study interface. ?condition=mudoc|texdoc|docsearch, optional
// ?doc=<id>&pages=<n> to open the viewer on a document immediately.

import { ApiClient, type ConditionName } from "./api";
import { buildApp } from "./app";

const CONDITIONS: ConditionName[] = ["mudoc", "texdoc", "docsearch"];

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const requested = params.get("condition") ?? "mudoc";
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  if (!CONDITIONS.includes(requested as ConditionName)) {
    root.textContent = `Unknown condition "${requested}".`;
    return;
  }

  const api = new ApiClient(params.get("base") ?? "");
  try {
    const session = await api.createSession(requested as ConditionName);
    buildApp(root, api, session, {
      doc: params.get("doc") ?? undefined,
      pages: params.get("pages") ? Number(params.get("pages")) : undefined,
    });
  } catch (error) {
    root.textContent = `Could not start a session: ${
      error instanceof Error ? error.message : String(error)
    }`;
  }
}

void start();
