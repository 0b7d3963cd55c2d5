/** Thin typed client for the /v1 annotation service. */

import type {
  AnnotateBody,
  AnnotateResponse,
  MetricsResponse,
  QueryResponse,
} from "./types.js";

export class StaleQueryError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "StaleQueryError";
  }
}

export class ApiError extends Error {
  constructor(
    public status: number,
    detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function detailOf(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    return body.detail ?? res.statusText;
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchFn(`${this.base}/v1${path}`, init);
    if (res.status === 409) throw new StaleQueryError(await detailOf(res));
    if (!res.ok) throw new ApiError(res.status, await detailOf(res));
    return res;
  }

  async createSession(opts: {
    strategy?: string;
    budget?: number;
    seed?: number;
  } = {}): Promise<string> {
    const res = await this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(opts),
    });
    const body = (await res.json()) as { session_id: string };
    return body.session_id;
  }

  async getQuery(sessionId: string): Promise<QueryResponse> {
    const res = await this.request(`/sessions/${sessionId}/query`);
    return (await res.json()) as QueryResponse;
  }

  async annotate(
    sessionId: string,
    body: AnnotateBody,
  ): Promise<AnnotateResponse> {
    const res = await this.request(`/sessions/${sessionId}/annotate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await res.json()) as AnnotateResponse;
  }

  async getMetrics(sessionId: string): Promise<MetricsResponse> {
    const res = await this.request(`/sessions/${sessionId}/metrics`);
    return (await res.json()) as MetricsResponse;
  }
}
