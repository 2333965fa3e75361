// Typed fetch wrappers over the session API. Each user input maps to
// exactly one of these calls; the server is the source of truth.

import type { ActionOutcome, ClientView, SessionInfo, Stage } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const parsed = (await res.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  createSession(): Promise<SessionInfo> {
    return this.request("POST", "/api/session");
  }

  getState(sessionId: string): Promise<ClientView> {
    return this.request("GET", `/api/session/${sessionId}/state`);
  }

  advance(sessionId: string): Promise<{ stage: Stage }> {
    return this.request("POST", `/api/session/${sessionId}/advance`);
  }

  submitAction(sessionId: string, action: number, roundToken: string): Promise<ActionOutcome> {
    return this.request("POST", `/api/session/${sessionId}/action`, {
      action,
      round_token: roundToken,
    });
  }

  submitPreference(sessionId: string, label: string): Promise<{ stage: Stage; chosen: string }> {
    return this.request("POST", `/api/session/${sessionId}/preference`, { label });
  }

  submitSurvey(sessionId: string, answers: Record<string, string>): Promise<{ stage: Stage }> {
    return this.request("POST", `/api/session/${sessionId}/survey`, { answers });
  }
}
