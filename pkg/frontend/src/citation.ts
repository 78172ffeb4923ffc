// follow_citation: resolve block coordinates, jump the document viewer
// there, and log the click. Unknown targets toast instead of navigating.

import { ApiError, type StudyApi } from "./api";
import type { TabName } from "./state";
import type { DocumentViewer } from "./viewer";

export interface CitationContext {
  api: StudyApi;
  sessionId: string;
  viewer: DocumentViewer;
  setTab: (tab: TabName) => void;
  showToast: (text: string) => void;
}

export async function followCitation(
  context: CitationContext,
  docId: string,
  blockIds: number[],
): Promise<boolean> {
  let blocks;
  try {
    blocks = await Promise.all(blockIds.map((id) => context.api.blockInfo(docId, id)));
  } catch (error) {
    const note = error instanceof ApiError && error.status === 404
      ? "Citation target not found."
      : "Could not load the citation target.";
    context.showToast(note);
    return false;
  }
  if (blocks.length === 0) return false;

  const page = blocks[0].page;
  const bboxes = blocks.filter((b) => b.page === page).map((b) => b.bbox);
  context.setTab("document");
  if (context.viewer.currentDoc !== docId) context.viewer.openDocument(docId, page);
  context.viewer.showPage(page);
  context.viewer.highlightBlocks(docId, page, bboxes);

  context.api
    .logEvent(context.sessionId, { type: "citation_click", doc_id: docId, block_ids: blockIds })
    .catch(() => undefined); // telemetry loss never blocks navigation
  return true;
}
