// Thin typed client for the annotation service HTTP API.

import type { Choice, HealthResponse, LabelResponse, PairResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** Every scenario pair has been labeled; the service replies 409. */
export class ExhaustedError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ExhaustedError";
  }
}

type FetchFn = typeof fetch;

export class AnnotationClient {
  constructor(
    readonly baseUrl: string,
    readonly annotator: string,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  async health(): Promise<HealthResponse> {
    return this.json(await this.fetchFn(`${this.baseUrl}/api/health`));
  }

  async nextPair(strategy?: string): Promise<PairResponse> {
    const query = new URLSearchParams({ annotator: this.annotator });
    if (strategy) query.set("strategy", strategy);
    const response = await this.fetchFn(`${this.baseUrl}/api/pair?${query}`);
    if (response.status === 409) {
      throw new ExhaustedError(await detailOf(response));
    }
    return this.json(response);
  }

  async submit(pairId: string, choice: Choice): Promise<LabelResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pair_id: pairId, choice }),
    });
    return this.json(response);
  }

  async exportText(): Promise<string> {
    const response = await this.fetchFn(`${this.baseUrl}/api/export`);
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return response.text();
  }

  private async json<T>(response: Response): Promise<T> {
    if (!response.ok) throw new ApiError(response.status, await detailOf(response));
    return (await response.json()) as T;
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}
