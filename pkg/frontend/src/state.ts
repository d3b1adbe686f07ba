/**
 * UI state machine for the composer loop.
 *
 * Phases move empty -> seeded -> browsing -> extended, with re-seeding
 * and further browsing allowed from any non-empty phase.  The server
 * session is the source of truth: phases only advance on events that
 * carry the server's own response, so the mirrored melody can never
 * diverge from what an export would produce.
 */

import type { Continuation, Note } from "./api.js";

export type Phase = "empty" | "seeded" | "browsing" | "extended";

export interface ComposerState {
  phase: Phase;
  sessionId: string | null;
  melody: Note[];
  continuations: Continuation[];
  error: string | null;
}

export type ComposerEvent =
  | { type: "session_created"; sessionId: string }
  | { type: "seed_accepted"; melody: Note[] }
  | { type: "continuations_received"; continuations: Continuation[] }
  | { type: "continuation_accepted"; melody: Note[] }
  | { type: "request_failed"; message: string }
  | { type: "reset" };

export class IllegalTransition extends Error {
  constructor(phase: Phase, event: string) {
    super(`event "${event}" is not allowed in phase "${phase}"`);
  }
}

export function initialState(): ComposerState {
  return {
    phase: "empty",
    sessionId: null,
    melody: [],
    continuations: [],
    error: null,
  };
}

export function transition(
  state: ComposerState,
  event: ComposerEvent,
): ComposerState {
  switch (event.type) {
    case "session_created":
      // a fresh server session restarts the loop
      return { ...initialState(), sessionId: event.sessionId };

    case "seed_accepted":
      if (state.sessionId === null || event.melody.length === 0) {
        throw new IllegalTransition(state.phase, event.type);
      }
      return {
        ...state,
        phase: "seeded",
        melody: event.melody,
        continuations: [],
        error: null,
      };

    case "continuations_received":
      if (state.phase === "empty" || event.continuations.length === 0) {
        throw new IllegalTransition(state.phase, event.type);
      }
      return {
        ...state,
        phase: "browsing",
        continuations: event.continuations,
        error: null,
      };

    case "continuation_accepted":
      if (state.phase !== "browsing" || event.melody.length === 0) {
        throw new IllegalTransition(state.phase, event.type);
      }
      return {
        ...state,
        phase: "extended",
        melody: event.melody,
        continuations: [],
        error: null,
      };

    case "request_failed":
      // failures never move the phase or touch the mirrored melody
      return { ...state, error: event.message };

    case "reset":
      return initialState();
  }
}

/** Which controls are live in the current phase (the rest render disabled). */
export interface Controls {
  seed: boolean;
  requestContinuations: boolean;
  accept: boolean;
  export: boolean;
}

export function controls(state: ComposerState): Controls {
  return {
    seed: state.sessionId !== null,
    requestContinuations: state.phase !== "empty",
    accept: state.phase === "browsing" && state.continuations.length > 0,
    export: state.phase !== "empty" && state.melody.length > 0,
  };
}

/** Invariants every reachable state satisfies; property tests pin these. */
export function invariantsHold(state: ComposerState): boolean {
  if (state.phase === "empty") {
    return state.melody.length === 0 && state.continuations.length === 0;
  }
  if (state.melody.length === 0) return false;
  if (state.phase === "browsing") return state.continuations.length > 0;
  return state.continuations.length === 0;
}
