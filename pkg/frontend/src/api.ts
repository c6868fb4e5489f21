// Thin typed client over the review HTTP API.
//
// All verdict and accuracy logic lives server-side; this module only moves
// JSON. The fetch function is injectable so tests (and the offline
// simulator) can gate connectivity.

import type {
  AssignedItem,
  Progress,
  ReviewItemView,
  SessionSummary,
  StatsResponse,
  Verdict,
  VerdictAck,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Server answered with a non-2xx status (assignment mismatch, bad input…). */
export class HttpError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: string,
  ) {
    super(`HTTP ${status}: ${body}`);
  }
}

export function isNetworkFailure(error: unknown): boolean {
  return !(error instanceof HttpError);
}

/** The slice of the API the review loop depends on (fakeable in tests). */
export interface ReviewClient {
  items(sessionId: string, annotator?: string): Promise<{ items: AssignedItem[] }>;
  itemDetail(itemId: string): Promise<ReviewItemView>;
  submitVerdict(
    sessionId: string,
    itemId: string,
    annotatorId: string,
    verdict: Verdict,
  ): Promise<VerdictAck>;
  stats(sessionId: string): Promise<StatsResponse>;
}

export class ReviewApi implements ReviewClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await response.text();
    if (!response.ok) {
      throw new HttpError(response.status, body);
    }
    return JSON.parse(body) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("/api/sessions");
  }

  createSession(body: {
    sample_size: number;
    annotators: string[];
    seed: number;
    session_id?: string;
    items?: unknown[];
  }): Promise<{ session_id: string; progress: Progress }> {
    return this.post("/api/sessions", body);
  }

  items(sessionId: string, annotator?: string): Promise<{ items: AssignedItem[] }> {
    const query = annotator ? `?annotator=${encodeURIComponent(annotator)}` : "";
    return this.request(`/api/sessions/${sessionId}/items${query}`);
  }

  itemDetail(itemId: string): Promise<ReviewItemView> {
    return this.request(`/api/items/${itemId}`);
  }

  submitVerdict(
    sessionId: string,
    itemId: string,
    annotatorId: string,
    verdict: Verdict,
  ): Promise<VerdictAck> {
    return this.post(`/api/sessions/${sessionId}/verdicts`, {
      item_id: itemId,
      annotator_id: annotatorId,
      verdict,
    });
  }

  stats(sessionId: string): Promise<StatsResponse> {
    return this.request(`/api/sessions/${sessionId}/stats`);
  }
}
