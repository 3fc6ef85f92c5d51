// Thin typed client over the prediction service. All model math lives on
// the server; this module only moves JSON.

import type {
  CohortSummary,
  StrategyResponse,
  StudentDetail,
  StudentRecord,
  WhatIfResponse,
  WindowCell,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class OlitApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  students(): Promise<StudentRecord[]> {
    return this.request<StudentRecord[]>("/students");
  }

  student(id: string): Promise<StudentDetail> {
    return this.request<StudentDetail>(`/students/${encodeURIComponent(id)}`);
  }

  strategy(id: string, targets: number[] = [4, 5], week = 5): Promise<StrategyResponse> {
    const params = new URLSearchParams({
      target: targets.join(","),
      week: String(week),
    });
    return this.request<StrategyResponse>(
      `/students/${encodeURIComponent(id)}/strategy?${params.toString()}`,
    );
  }

  whatIf(id: string, overrides: Record<string, number>): Promise<WhatIfResponse> {
    return this.request<WhatIfResponse>("/whatif", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ student_id: id, overrides }),
    });
  }

  cohortSummary(): Promise<CohortSummary> {
    return this.request<CohortSummary>("/cohort/summary");
  }

  table1(): Promise<{ cells: WindowCell[] }> {
    return this.request<{ cells: WindowCell[] }>("/experiment/table1");
  }
}

export function defaultBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery;
  const stored = window.localStorage.getItem("olit.apiBase");
  if (stored) return stored;
  return "http://127.0.0.1:8080";
}
