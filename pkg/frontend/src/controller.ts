/**
 * Async glue between the API client and the state machine.
 *
 * All server traffic funnels through here; at most one continuation
 * request is in flight per session, later clicks queue behind it.
 */

import { ApiError, ComposerClient, ContinuationSettings } from "./api.js";
import {
  ComposerEvent,
  ComposerState,
  initialState,
  transition,
} from "./state.js";

export type Listener = (state: ComposerState) => void;

export class ComposerController {
  private client: ComposerClient;
  private state: ComposerState = initialState();
  private listeners: Listener[] = [];
  private pending: Promise<void> = Promise.resolve();

  constructor(client: ComposerClient) {
    this.client = client;
  }

  get current(): ComposerState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private dispatch(event: ComposerEvent): void {
    this.state = transition(this.state, event);
    for (const listener of this.listeners) listener(this.state);
  }

  private fail(err: unknown): void {
    const message =
      err instanceof ApiError && err.tokens.length > 0
        ? `out-of-vocabulary tokens: ${err.tokens.join(", ")}`
        : err instanceof Error
          ? err.message
          : String(err);
    this.dispatch({ type: "request_failed", message });
  }

  /** Serialize an operation behind any in-flight request. */
  private enqueue(op: () => Promise<void>): Promise<void> {
    this.pending = this.pending.then(op, op);
    return this.pending;
  }

  startSession(): Promise<void> {
    return this.enqueue(async () => {
      try {
        const sessionId = await this.client.createSession();
        this.dispatch({ type: "session_created", sessionId });
      } catch (err) {
        this.fail(err);
      }
    });
  }

  setSeed(abc: string): Promise<void> {
    return this.enqueue(async () => {
      const sessionId = this.state.sessionId;
      if (sessionId === null) return;
      try {
        const melody = await this.client.setSeed(sessionId, abc);
        this.dispatch({ type: "seed_accepted", melody: melody.melody });
      } catch (err) {
        this.fail(err);
      }
    });
  }

  requestContinuations(settings: ContinuationSettings): Promise<void> {
    return this.enqueue(async () => {
      const sessionId = this.state.sessionId;
      if (sessionId === null || this.state.phase === "empty") return;
      try {
        const continuations = await this.client.requestContinuations(
          sessionId,
          settings,
        );
        this.dispatch({ type: "continuations_received", continuations });
      } catch (err) {
        this.fail(err);
      }
    });
  }

  accept(continuationId: number, prefixLen: number): Promise<void> {
    return this.enqueue(async () => {
      const sessionId = this.state.sessionId;
      if (sessionId === null || this.state.phase !== "browsing") return;
      try {
        const melody = await this.client.accept(
          sessionId,
          continuationId,
          prefixLen,
        );
        this.dispatch({
          type: "continuation_accepted",
          melody: melody.melody,
        });
      } catch (err) {
        this.fail(err);
      }
    });
  }

  async exportAbc(): Promise<string | null> {
    const sessionId = this.state.sessionId;
    if (sessionId === null || this.state.melody.length === 0) return null;
    try {
      return await this.client.exportAbc(sessionId);
    } catch (err) {
      this.fail(err);
      return null;
    }
  }
}
