/** HTTP client for the session service, with retry and idempotent submits.
 *
 * Submissions that fail from network errors are cached in a local queue and
 * flushed before the next call; the server treats a resubmitted identical
 * ranking as an idempotent ack, so reconnect never double-counts.
 */

import type { QueryView, SnapshotView, SubmitAck } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

const RETRYABLE_STATUS = new Set([429, 502, 503, 504]);

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export async function withRetry<T>(
  fn: () => Promise<T>,
  label: string,
  tries = 5,
  baseDelayMs = 200,
): Promise<T> {
  let delay = baseDelayMs;
  for (let attempt = 0; attempt < tries; attempt++) {
    try {
      return await fn();
    } catch (error) {
      const status = error instanceof ApiError ? error.status : undefined;
      const retryable = status === undefined || RETRYABLE_STATUS.has(status);
      if (!retryable || attempt === tries - 1) throw error;
      await new Promise((resolve) => setTimeout(resolve, delay));
      delay *= 2;
    }
  }
  throw new Error(`withRetry(${label}) exhausted`);
}

interface PendingSubmit {
  queryId: string;
  ranking: number[];
  elapsedSeconds: number;
}

export class SessionClient {
  private pending: PendingSubmit[] = [];
  private submitted = new Map<string, number[]>();

  constructor(
    private baseUrl: string,
    public sessionId: string | null = null,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (error) {
      throw new ApiError(0, `network failure: ${String(error)}`);
    }
    return response;
  }

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${path} -> ${response.status}`);
    }
    return (await response.json()) as T;
  }

  async createSession(catalogId: string, config: Record<string, unknown> = {}): Promise<string> {
    const body = JSON.stringify({ catalog_id: catalogId, config });
    const result = await withRetry(
      () =>
        this.requestJson<{ session_id: string }>("/sessions", {
          method: "POST",
          headers: { "content-type": "application/json" },
          body,
        }),
      "createSession",
    );
    this.sessionId = result.session_id;
    return result.session_id;
  }

  private sessionPath(suffix: string): string {
    if (!this.sessionId) throw new Error("no session; call createSession first");
    return `/sessions/${this.sessionId}${suffix}`;
  }

  /** Next query to label, or null once the session is exhausted. */
  async nextQuery(): Promise<QueryView | null> {
    await this.flushPending();
    return withRetry(async () => {
      const response = await this.request(this.sessionPath("/next"));
      if (response.status === 410) return null;
      if (!response.ok) throw new ApiError(response.status, `next -> ${response.status}`);
      return (await response.json()) as QueryView;
    }, "nextQuery");
  }

  /**
   * Submit a ranking (most-similar first). Network failures queue the
   * submission for a later flush instead of losing it; duplicates are
   * impossible because the queue is keyed by query id.
   */
  async submitRanking(
    queryId: string,
    ranking: number[],
    elapsedSeconds: number,
  ): Promise<SubmitAck | "queued"> {
    if (this.pending.some((p) => p.queryId === queryId)) {
      return "queued"; // the flush loop owns it; never double-post
    }
    if (!this.submitted.has(queryId)) {
      this.submitted.set(queryId, [...ranking]);
    }
    const entry: PendingSubmit = { queryId, ranking: [...ranking], elapsedSeconds };
    try {
      return await this.postSubmit(entry);
    } catch (error) {
      if (error instanceof ApiError && error.status === 0) {
        this.pending.push(entry);
        return "queued";
      }
      throw error;
    }
  }

  private async postSubmit(entry: PendingSubmit): Promise<SubmitAck> {
    return this.requestJson<SubmitAck>(this.sessionPath("/rankings"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        query_id: entry.queryId,
        ranking: entry.ranking,
        elapsed_seconds: entry.elapsedSeconds,
      }),
    });
  }

  /** Retry queued submissions; keeps order and stops at the first failure. */
  async flushPending(): Promise<number> {
    let flushed = 0;
    while (this.pending.length > 0) {
      const entry = this.pending[0];
      try {
        await this.postSubmit(entry);
      } catch (error) {
        if (error instanceof ApiError && error.status === 0) return flushed;
        if (error instanceof ApiError && error.status === 409) {
          // Answered before the connection dropped; drop the duplicate.
        } else {
          throw error;
        }
      }
      this.pending.shift();
      flushed += 1;
    }
    return flushed;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  async snapshot(): Promise<SnapshotView> {
    return withRetry(() => this.requestJson<SnapshotView>(this.sessionPath("/snapshot")), "snapshot");
  }

  async journal(): Promise<string> {
    const response = await this.request(this.sessionPath("/journal"));
    if (!response.ok) throw new ApiError(response.status, "journal");
    return response.text();
  }
}
