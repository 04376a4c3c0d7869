/** Typed client for the /v1 HTTP API. At most one recommendation request is
 * in flight: a newer one aborts its predecessor.
 */
import type {
  CatalogDoc,
  GraphDoc,
  RecommendOptions,
  RecommendResponse,
  SceneDoc,
  Violation,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`service returned ${status}`);
  }
}

export class ApiClient {
  private recommendAbort: AbortController | null = null;

  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, (body as { detail?: unknown })?.detail ?? body);
    }
    return body as T;
  }

  health(): Promise<{ status: string; checkpoint_id?: string }> {
    return this.request("/v1/health");
  }

  catalog(): Promise<CatalogDoc> {
    return this.request("/v1/catalog");
  }

  async validate(scene: SceneDoc): Promise<Violation[]> {
    const body = await this.request<{ violations: Violation[] }>("/v1/validate", {
      method: "POST",
      body: JSON.stringify({ scene }),
    });
    return body.violations;
  }

  extract(scene: SceneDoc): Promise<GraphDoc> {
    return this.request("/v1/extract", {
      method: "POST",
      body: JSON.stringify({ scene }),
    });
  }

  /** Aborts any still-running recommend call before issuing this one. */
  recommend(scene: SceneDoc, options: RecommendOptions = {}): Promise<RecommendResponse> {
    this.recommendAbort?.abort();
    const controller = new AbortController();
    this.recommendAbort = controller;
    return this.request<RecommendResponse>("/v1/recommend", {
      method: "POST",
      body: JSON.stringify({ scene, options }),
      signal: controller.signal,
    }).finally(() => {
      if (this.recommendAbort === controller) this.recommendAbort = null;
    });
  }
}
