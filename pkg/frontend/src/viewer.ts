// Document viewer: lazily materialized page images with a single timed
// highlight overlay. Only one highlight lives at a time; a newer one
// supersedes the pending clear of the old.

import type { StudyApi } from "./api";
import type { Highlight } from "./state";

export const HIGHLIGHT_MS = 4000;

export class DocumentViewer {
  readonly element: HTMLElement;
  private docId: string | null = null;
  private pageSlots = new Map<number, HTMLElement>();
  private highlightState: Highlight | null = null;
  private highlightToken = 0;
  private emptyNote: HTMLElement;

  constructor(
    private readonly api: StudyApi,
    private readonly highlightMs: number = HIGHLIGHT_MS,
  ) {
    this.element = document.createElement("div");
    this.element.className = "viewer";
    this.emptyNote = document.createElement("p");
    this.emptyNote.className = "viewer-empty";
    this.emptyNote.textContent = "No document open yet.";
    this.element.appendChild(this.emptyNote);
  }

  get highlight(): Highlight | null {
    return this.highlightState;
  }

  get currentDoc(): string | null {
    return this.docId;
  }

  openDocument(docId: string, pageCount: number): void {
    if (this.docId !== docId) {
      this.docId = docId;
      this.pageSlots.clear();
      this.element.replaceChildren();
      this.clearHighlight();
    }
    for (let page = 1; page <= pageCount; page++) this.ensurePage(page);
  }

  /** Create slots up to `page` so navigation can land on unseen pages. */
  ensurePage(page: number): HTMLElement {
    const existing = this.pageSlots.get(page);
    if (existing) return existing;
    if (!this.docId) throw new Error("no document open");
    for (let p = this.pageSlots.size + 1; p <= page; p++) {
      const slot = document.createElement("div");
      slot.className = "page";
      slot.dataset.page = String(p);
      const img = document.createElement("img");
      img.loading = "lazy"; // pages fetch only when scrolled near
      img.src = this.api.pageImageUrl(this.docId, p);
      img.alt = `page ${p}`;
      slot.appendChild(img);
      this.element.appendChild(slot);
      this.pageSlots.set(p, slot);
    }
    return this.pageSlots.get(page)!;
  }

  showPage(page: number): void {
    const slot = this.ensurePage(page);
    slot.scrollIntoView?.({ block: "start" });
  }

  highlightBlocks(docId: string, page: number, bboxes: number[][]): void {
    this.clearHighlight();
    const token = ++this.highlightToken;
    this.highlightState = { docId, page, bboxes, expiresAt: Date.now() + this.highlightMs };
    const slot = this.ensurePage(page);
    for (const [left, top, width, height] of bboxes) {
      const box = document.createElement("div");
      box.className = "highlight";
      box.style.left = `${left * 100}%`;
      box.style.top = `${top * 100}%`;
      box.style.width = `${width * 100}%`;
      box.style.height = `${height * 100}%`;
      slot.appendChild(box);
    }
    setTimeout(() => {
      if (this.highlightToken === token) this.clearHighlight();
    }, this.highlightMs);
  }

  clearHighlight(): void {
    this.highlightState = null;
    for (const box of Array.from(this.element.querySelectorAll(".highlight"))) {
      box.remove();
    }
  }
}
