// DocSearch panel: a query box and a result list navigated cyclically
// with the arrow keys. Moving the cursor jumps the viewer to that block.

import type { StudyApi, SearchResult } from "./api";
import type { DocumentViewer } from "./viewer";

export function moveCursor(count: number, cursor: number, delta: number): number {
  if (count === 0) return -1;
  if (cursor < 0) return delta > 0 ? 0 : count - 1;
  return (cursor + delta + count) % count;
}

export class SearchPanel {
  readonly element: HTMLElement;
  readonly input: HTMLInputElement;
  private list: HTMLElement;
  private results: SearchResult[] = [];
  private cursor = -1;

  constructor(
    private readonly api: StudyApi,
    private readonly sessionId: string,
    private readonly viewer: DocumentViewer,
  ) {
    this.element = document.createElement("div");
    this.element.className = "search-panel";

    const form = document.createElement("form");
    this.input = document.createElement("input");
    this.input.type = "search";
    this.input.placeholder = "Search the document";
    this.input.setAttribute("aria-label", "search");
    const button = document.createElement("button");
    button.type = "submit";
    button.textContent = "Search";
    form.append(this.input, button);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runQuery(this.input.value);
    });

    this.list = document.createElement("ol");
    this.list.className = "search-results";
    this.element.append(form, this.list);

    this.element.addEventListener("keydown", (event) => {
      if (event.key === "ArrowDown") {
        event.preventDefault();
        this.move(1);
      } else if (event.key === "ArrowUp") {
        event.preventDefault();
        this.move(-1);
      }
    });
  }

  get cursorIndex(): number {
    return this.cursor;
  }

  get resultCount(): number {
    return this.results.length;
  }

  async runQuery(query: string): Promise<void> {
    if (!query.trim()) return;
    try {
      this.setResults(await this.api.search(this.sessionId, query));
    } catch {
      this.setResults([]);
      const note = document.createElement("li");
      note.className = "search-error";
      note.textContent = "Search failed; try again.";
      this.list.appendChild(note);
    }
  }

  setResults(results: SearchResult[]): void {
    this.results = results;
    this.cursor = -1;
    this.list.replaceChildren();
    results.forEach((result, i) => {
      const item = document.createElement("li");
      item.className = "search-result";
      item.textContent = `p.${result.page}: ${result.snippet}`;
      item.addEventListener("click", () => this.select(i));
      this.list.appendChild(item);
    });
  }

  move(delta: number): void {
    const next = moveCursor(this.results.length, this.cursor, delta);
    if (next === -1) return; // empty results leave the keys inert
    this.select(next);
  }

  select(index: number): void {
    this.cursor = index;
    Array.from(this.list.children).forEach((child, i) =>
      child.classList.toggle("selected", i === index),
    );
    const result = this.results[index];
    if (this.viewer.currentDoc !== result.doc_id) {
      this.viewer.openDocument(result.doc_id, result.page);
    }
    this.viewer.showPage(result.page);
    this.viewer.highlightBlocks(result.doc_id, result.page, [result.bbox]);
  }
}
