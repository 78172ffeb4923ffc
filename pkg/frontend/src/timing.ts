// Phase gate: Next stays disabled until the minimum study time accrues;
// hitting the maximum advances on its own, but never mid-stream.

import type { TimingState } from "./api";

export class PhaseGate {
  private mustAdvance = false;
  private advanced = false;

  constructor(
    readonly button: HTMLButtonElement,
    private readonly onAdvance: () => void,
    private readonly isStreamOpen: () => boolean = () => false,
  ) {
    this.button.disabled = true;
    this.button.addEventListener("click", () => {
      if (!this.button.disabled) this.advance();
    });
  }

  get hasAdvanced(): boolean {
    return this.advanced;
  }

  apply(timing: TimingState): void {
    if (this.advanced) return;
    this.button.disabled = !timing.can_advance;
    if (timing.must_advance) {
      this.mustAdvance = true;
      this.tryForcedAdvance();
    }
  }

  /** Call when a chat stream closes so a deferred advance can fire. */
  streamClosed(): void {
    this.tryForcedAdvance();
  }

  private tryForcedAdvance(): void {
    if (this.mustAdvance && !this.advanced && !this.isStreamOpen()) this.advance();
  }

  private advance(): void {
    if (this.advanced) return;
    this.advanced = true;
    this.button.disabled = true;
    this.onAdvance();
  }
}
