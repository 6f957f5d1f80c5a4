// Annotation flow state machine, free of DOM concerns so the full
// fetch -> choose -> export loop can run headless. One in-flight service
// request at a time; choices are ignored unless a pair is ready, which
// makes double-clicks harmless.

import { AnnotationClient, ExhaustedError } from "./api.js";
import type { Choice, PairResponse } from "./types.js";

export type FlowPhase =
  | "idle"
  | "loading"
  | "ready"
  | "submitting"
  | "exhausted"
  | "error";

export interface FlowState {
  phase: FlowPhase;
  pair: PairResponse | null;
  labeled: number;
  lastError: string | null;
}

export class AnnotationFlow {
  state: FlowState = { phase: "idle", pair: null, labeled: 0, lastError: null };
  onChange: (state: FlowState) => void = () => {};

  constructor(
    private readonly client: AnnotationClient,
    private readonly strategy?: string,
  ) {}

  /** Fetch the next pair; resolves once the panes can render. */
  async loadNext(): Promise<void> {
    if (this.state.phase === "loading" || this.state.phase === "submitting") return;
    this.update({ phase: "loading", pair: null, lastError: null });
    try {
      const pair = await this.client.nextPair(this.strategy);
      this.update({ phase: "ready", pair });
    } catch (err) {
      if (err instanceof ExhaustedError) {
        this.update({ phase: "exhausted", pair: null });
      } else {
        this.update({ phase: "error", lastError: messageOf(err) });
      }
    }
  }

  /** Submit a choice for the displayed pair, then auto-fetch the next one.
   * A no-op unless a pair is ready (buttons stay disabled elsewhere). */
  async choose(choice: Choice): Promise<void> {
    if (this.state.phase !== "ready" || this.state.pair === null) return;
    const pairId = this.state.pair.pair_id;
    this.update({ phase: "submitting" });
    try {
      await this.client.submit(pairId, choice);
      this.update({ phase: "idle", pair: null, labeled: this.state.labeled + 1 });
    } catch (err) {
      this.update({ phase: "error", lastError: messageOf(err) });
      return;
    }
    await this.loadNext();
  }

  /** Recover from a failed request by fetching a fresh pair; the service
   * never re-serves a labeled pair, so nothing is double-counted. */
  async retry(): Promise<void> {
    if (this.state.phase !== "error") return;
    this.update({ phase: "idle" });
    await this.loadNext();
  }

  private update(patch: Partial<FlowState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }
}

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
