/**
 * Typed client for the composer HTTP API.
 *
 * Every response is validated with zod before it reaches UI state, so a
 * drifting server contract fails loudly instead of rendering garbage.
 */

import { z } from "zod";

export const NoteSchema = z.object({
  pitch: z.string(),
  duration: z.string(),
  pitch_index: z.number().int(),
  duration_index: z.number().int(),
});

export const ContinuationNoteSchema = NoteSchema.extend({
  pitch_prob: z.number().gt(0).lte(1),
  duration_prob: z.number().gt(0).lte(1),
});

export const MelodySchema = z.object({
  length: z.number().int(),
  melody: z.array(NoteSchema),
});

export const ContinuationSchema = z.object({
  id: z.number().int(),
  terminated: z.enum(["ended_naturally", "truncated"]),
  notes: z.array(ContinuationNoteSchema),
});

export const ContinuationsSchema = z.object({
  continuations: z.array(ContinuationSchema),
});

export const ModelInfoSchema = z.object({
  vocab: z.object({
    pitches: z.array(z.string()),
    durations: z.array(z.string()),
  }),
  dims: z.record(z.unknown()),
  training_meta: z.record(z.unknown()),
});

export type Note = z.infer<typeof NoteSchema>;
export type ContinuationNote = z.infer<typeof ContinuationNoteSchema>;
export type Melody = z.infer<typeof MelodySchema>;
export type Continuation = z.infer<typeof ContinuationSchema>;
export type ModelInfo = z.infer<typeof ModelInfoSchema>;

export interface ContinuationSettings {
  n: number;
  length: number;
  temperature: number;
  rng_seed?: number;
}

/** Server-reported failure, carrying the HTTP status and parsed detail. */
export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.status = status;
    this.detail = detail;
  }

  /** Out-of-vocabulary seed rejections list the offending tokens. */
  get tokens(): string[] {
    if (
      typeof this.detail === "object" &&
      this.detail !== null &&
      Array.isArray((this.detail as { tokens?: unknown }).tokens)
    ) {
      return (this.detail as { tokens: string[] }).tokens;
    }
    return [];
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ComposerClient {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(
    path: string,
    init?: RequestInit,
  ): Promise<unknown> {
    const resp = await this.fetchImpl(this.base + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    if (!resp.ok) {
      const detail =
        typeof body === "object" && body !== null && "detail" in body
          ? (body as { detail: unknown }).detail
          : body;
      throw new ApiError(resp.status, detail);
    }
    return body;
  }

  private post(path: string, payload?: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
  }

  async modelInfo(): Promise<ModelInfo> {
    return ModelInfoSchema.parse(await this.request("/model"));
  }

  async createSession(): Promise<string> {
    const body = z
      .object({ session_id: z.string() })
      .parse(await this.post("/session"));
    return body.session_id;
  }

  async setSeed(sessionId: string, abc: string): Promise<Melody> {
    return MelodySchema.parse(
      await this.post(`/session/${sessionId}/seed`, { abc }),
    );
  }

  async requestContinuations(
    sessionId: string,
    settings: ContinuationSettings,
  ): Promise<Continuation[]> {
    const body = ContinuationsSchema.parse(
      await this.post(`/session/${sessionId}/continuations`, settings),
    );
    return body.continuations;
  }

  async accept(
    sessionId: string,
    continuationId: number,
    prefixLen: number,
  ): Promise<Melody> {
    return MelodySchema.parse(
      await this.post(`/session/${sessionId}/accept`, {
        continuation_id: continuationId,
        prefix_len: prefixLen,
      }),
    );
  }

  async exportAbc(sessionId: string): Promise<string> {
    const body = z
      .object({ abc: z.string() })
      .parse(await this.request(`/session/${sessionId}/export`));
    return body.abc;
  }
}
