import type {
  AlignmentDoc,
  ClustersDoc,
  ExtractionRequest,
  FeasibilityDoc,
  GraphDoc,
  HistoryDoc,
  ImagesPage,
  NarrativeMapDoc,
} from "./types.js";

/** Carries the server's {code, message, detail} error body plus the HTTP status. */
export class ApiFailure extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: unknown,
  ) {
    super(message);
    this.name = "ApiFailure";
  }
}

export interface ImageQuery {
  page?: number;
  pageSize?: number;
  category?: string;
  location?: string;
}

export class Api {
  constructor(readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await fetch(this.base + path, init);
    } catch (err) {
      throw new ApiFailure(0, "network", `cannot reach the API: ${String(err)}`, null);
    }
    let body: unknown = null;
    const text = await res.text();
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        body = null;
      }
    }
    if (!res.ok) {
      const e = (body ?? {}) as { code?: string; message?: string; detail?: unknown };
      throw new ApiFailure(
        res.status,
        e.code ?? `http-${res.status}`,
        e.message ?? `request failed with status ${res.status}`,
        e.detail ?? null,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  listImages(q: ImageQuery = {}): Promise<ImagesPage> {
    const params = new URLSearchParams();
    if (q.page !== undefined) params.set("page", String(q.page));
    if (q.pageSize !== undefined) params.set("page_size", String(q.pageSize));
    if (q.category) params.set("category", q.category);
    if (q.location) params.set("location", q.location);
    const qs = params.toString();
    return this.request<ImagesPage>(`/api/images${qs ? `?${qs}` : ""}`);
  }

  clusters(): Promise<ClustersDoc> {
    return this.request<ClustersDoc>("/api/clusters");
  }

  graph(space: string, itf: boolean): Promise<GraphDoc> {
    return this.request<GraphDoc>(`/api/graph?space=${encodeURIComponent(space)}&itf=${itf}`);
  }

  extract(req: ExtractionRequest): Promise<NarrativeMapDoc> {
    return this.post<NarrativeMapDoc>("/api/extract", req);
  }

  feasibility(req: ExtractionRequest): Promise<FeasibilityDoc> {
    return this.post<FeasibilityDoc>("/api/feasibility", req);
  }

  evaluate(timeline: string[], baseline: string[], space: string): Promise<AlignmentDoc> {
    return this.post<AlignmentDoc>("/api/evaluate", { timeline, baseline, space });
  }

  history(): Promise<HistoryDoc> {
    return this.request<HistoryDoc>("/api/history");
  }
}
