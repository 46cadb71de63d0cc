/**
 * Typed client for the prediction service JSON API.
 *
 * The service normalizes context words itself; this client only ships
 * them across. All endpoints live under the same origin by default so
 * the UI can be served by the prediction service directly.
 */

export interface Candidate {
  word: string;
  probability: number;
}

export interface PredictRequest {
  context: string[];
  k: number;
  model?: string;
  frequent_limit?: number;
}

export interface PredictResponse {
  candidates: Candidate[];
  model: string;
  excluded_oov: boolean;
}

export interface AcceptRequest {
  session: string | null;
  word: string;
  saved_chars: number;
}

export interface SessionTotals {
  accepts: number;
  keys_saved: number;
  keys_typed: number;
}

export interface AcceptResponse {
  session: string;
  created: boolean;
  corrected: boolean;
  saved_chars: number;
  totals: SessionTotals;
}

export interface ModelInfo {
  name: string;
  type: string;
  vocab_size: number;
  n?: number;
  cell?: string;
}

export interface InfoResponse {
  models: ModelInfo[];
  version: string;
}

/** What the session logic needs from the backend. */
export interface PredictiveService {
  predict(req: PredictRequest): Promise<PredictResponse>;
  accept(req: AcceptRequest): Promise<AcceptResponse>;
}

export class HttpService implements PredictiveService {
  constructor(private readonly base: string = "") {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const body = await resp.json();
        detail = body?.error?.message ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new Error(`service error: ${detail}`);
    }
    return (await resp.json()) as T;
  }

  predict(req: PredictRequest): Promise<PredictResponse> {
    return this.post<PredictResponse>("/api/predict", req);
  }

  accept(req: AcceptRequest): Promise<AcceptResponse> {
    return this.post<AcceptResponse>("/api/accept", req);
  }

  async info(): Promise<InfoResponse> {
    const resp = await fetch(this.base + "/api/info");
    if (!resp.ok) throw new Error(`service error: ${resp.status}`);
    return (await resp.json()) as InfoResponse;
  }
}
