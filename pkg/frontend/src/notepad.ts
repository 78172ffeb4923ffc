// Quarter-width notepad with debounced autosave: one PUT per idle pause.

const IDLE_MS = 1500;

export class Notepad {
  readonly element: HTMLElement;
  readonly textarea: HTMLTextAreaElement;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastSaved: string | null = null;

  constructor(
    private readonly save: (text: string) => Promise<unknown>,
    private readonly idleMs: number = IDLE_MS,
  ) {
    this.element = document.createElement("aside");
    this.element.className = "notepad";
    const heading = document.createElement("h2");
    heading.textContent = "Notes";
    this.textarea = document.createElement("textarea");
    this.textarea.setAttribute("aria-label", "notepad");
    this.textarea.addEventListener("input", () => this.input(this.textarea.value));
    this.element.append(heading, this.textarea);
  }

  get draft(): string {
    return this.textarea.value;
  }

  setDraft(text: string): void {
    this.textarea.value = text;
    this.lastSaved = text;
  }

  input(_text: string): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.idleMs);
  }

  async flush(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const text = this.textarea.value;
    if (text === this.lastSaved) return;
    try {
      await this.save(text);
      this.lastSaved = text;
    } catch {
      // keep the draft; the next pause retries
    }
  }
}
