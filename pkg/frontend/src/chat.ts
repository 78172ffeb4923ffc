// Chat panel: sends one turn at a time and renders the event stream
// incrementally: prose, inline figures with source links, citation
// icons, the activity indicator, and per-turn trace badges.

import type { StudyApi, StreamEvent } from "./api";
import { AgentMessage, applyEvent, emptyMessage } from "./transcript";

export interface ChatCallbacks {
  onCitation: (docId: string, blockIds: number[]) => void;
  onStreamClosed: () => void;
}

export class ChatPanel {
  readonly element: HTMLElement;
  readonly input: HTMLInputElement;
  readonly sendButton: HTMLButtonElement;
  private transcriptHost: HTMLElement;
  private statusLine: HTMLElement;
  private streaming = false;
  private committedTurns = 0;
  readonly messages: AgentMessage[] = [];

  constructor(
    private readonly api: StudyApi,
    private readonly sessionId: string,
    private readonly callbacks: ChatCallbacks,
  ) {
    this.element = document.createElement("div");
    this.element.className = "chat-panel";

    this.transcriptHost = document.createElement("div");
    this.transcriptHost.className = "transcript";

    this.statusLine = document.createElement("p");
    this.statusLine.className = "status-line";
    this.statusLine.hidden = true;

    const form = document.createElement("form");
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.setAttribute("aria-label", "message");
    this.input.placeholder = "Ask about the document";
    this.sendButton = document.createElement("button");
    this.sendButton.type = "submit";
    this.sendButton.textContent = "Send";
    form.append(this.input, this.sendButton);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.send(this.input.value);
    });

    this.element.append(this.transcriptHost, this.statusLine, form);
  }

  get isStreaming(): boolean {
    return this.streaming;
  }

  async send(text: string): Promise<void> {
    if (this.streaming || !text.trim()) return;
    this.streaming = true;
    this.sendButton.disabled = true;
    this.input.value = "";

    const userBubble = document.createElement("div");
    userBubble.className = "message user";
    userBubble.textContent = text;
    this.transcriptHost.appendChild(userBubble);

    // Trace fetches use the service's turn numbering, which only counts
    // committed turns; an aborted turn must not advance it.
    const turn = this.committedTurns + 1;
    const model = emptyMessage();
    this.messages.push(model);
    const bubble = this.makeAgentBubble(turn);
    this.transcriptHost.appendChild(bubble.root);

    try {
      for await (const event of this.api.chat(this.sessionId, text)) {
        applyEvent(model, event);
        this.renderEvent(bubble, event, turn);
        if (event.type === "Done") this.committedTurns = turn;
      }
    } catch (error) {
      model.error = error instanceof Error ? error.message : String(error);
      bubble.parts.appendChild(this.errorNode(model.error));
    } finally {
      this.streaming = false;
      this.sendButton.disabled = false;
      this.statusLine.hidden = true;
      this.callbacks.onStreamClosed();
    }
  }

  private makeAgentBubble(turn: number) {
    const root = document.createElement("div");
    root.className = "message agent";
    const avatar = document.createElement("div");
    avatar.className = "avatar-strip";
    const face = document.createElement("span");
    face.className = "avatar";
    face.textContent = "AI";
    avatar.appendChild(face);
    const parts = document.createElement("div");
    parts.className = "parts";
    root.append(avatar, parts);
    return { root, avatar, parts, turn, textNode: null as HTMLElement | null };
  }

  private renderEvent(
    bubble: { root: HTMLElement; avatar: HTMLElement; parts: HTMLElement; textNode: HTMLElement | null },
    event: StreamEvent,
    turn: number,
  ): void {
    switch (event.type) {
      case "TextDelta": {
        if (!bubble.textNode) {
          bubble.textNode = document.createElement("span");
          bubble.textNode.className = "prose";
          bubble.parts.appendChild(bubble.textNode);
        }
        bubble.textNode.textContent += event.text;
        return;
      }
      case "Citation": {
        bubble.textNode = null;
        const link = document.createElement("button");
        link.type = "button";
        link.className = "citation-link";
        link.title = `source: ${event.doc_id} block ${event.block_ids.join(", ")}`;
        link.textContent = "¶";
        const ids = [...event.block_ids];
        link.addEventListener("click", () => this.callbacks.onCitation(event.doc_id, ids));
        bubble.parts.appendChild(link);
        return;
      }
      case "Figure": {
        bubble.textNode = null;
        bubble.parts.appendChild(this.figureNode(event));
        return;
      }
      case "Status": {
        this.statusLine.hidden = false;
        this.statusLine.textContent = `${event.phase}…`;
        return;
      }
      case "TraceAvailable": {
        const badge = document.createElement("button");
        badge.type = "button";
        badge.className = "trace-icon";
        badge.textContent = "⚙";
        badge.title = `reasoning step ${event.iteration}`;
        badge.addEventListener("click", () => void this.showTrace(bubble.root, turn));
        bubble.avatar.appendChild(badge);
        return;
      }
      case "Error": {
        bubble.parts.appendChild(this.errorNode(event.message));
        return;
      }
      case "Done":
        return;
    }
  }

  private figureNode(event: { doc_id: string; block_id: number; caption: string }): HTMLElement {
    const figure = document.createElement("figure");
    const img = document.createElement("img");
    img.alt = event.caption;
    const caption = document.createElement("figcaption");
    caption.textContent = event.caption;
    const source = document.createElement("button");
    source.type = "button";
    source.className = "citation-link figure-source";
    source.title = `open ${event.doc_id} block ${event.block_id}`;
    source.textContent = "⧉";
    source.addEventListener("click", () =>
      this.callbacks.onCitation(event.doc_id, [event.block_id]),
    );
    caption.appendChild(source);
    figure.append(img, caption);
    void this.api
      .blockInfo(event.doc_id, event.block_id)
      .then((block) => {
        if (block.image_b64) img.src = `data:image/png;base64,${block.image_b64}`;
      })
      .catch(() => {
        figure.classList.add("figure-unavailable");
      });
    return figure;
  }

  private errorNode(message: string): HTMLElement {
    const node = document.createElement("p");
    node.className = "stream-error";
    node.textContent = `The turn failed: ${message}`;
    return node;
  }

  private async showTrace(bubbleRoot: HTMLElement, turn: number): Promise<void> {
    let details = bubbleRoot.querySelector("details.trace-view") as HTMLDetailsElement | null;
    if (details) {
      details.open = !details.open;
      return;
    }
    details = document.createElement("details");
    details.className = "trace-view";
    const summary = document.createElement("summary");
    summary.textContent = "Reasoning trace";
    details.appendChild(summary);
    const body = document.createElement("pre");
    try {
      const payload = await this.api.turnTrace(this.sessionId, turn);
      body.textContent = JSON.stringify(payload.traces, null, 2);
    } catch {
      body.textContent = "Trace unavailable.";
    }
    details.appendChild(body);
    details.open = true;
    bubbleRoot.appendChild(details);
  }
}
