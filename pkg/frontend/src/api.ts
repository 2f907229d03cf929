/**
 * Typed client for the retrieval engine's /v1 HTTP API.
 *
 * Every call goes through a single injected fetch function so tests can
 * substitute a mock transport. The client performs no scoring or metric
 * math; it only shapes requests and validates response envelopes.
 */

export type Garment = "upper" | "lower";
export type EngineKind = "generative" | "discriminative";

export interface AnnotationPayload {
  image_id: string;
  garment: Garment;
  color_label: string;
  author?: string;
}

export interface AnnotationResponse {
  created: boolean;
  labels: Record<string, number>;
}

export interface SampleListing {
  samples: string[];
  labels: Record<string, number>;
}

export interface TrainRequest {
  dataset: string;
  label: string;
  garment: Garment;
  engine?: EngineKind;
  k?: number;
  seed?: number;
  sample_ids?: string[];
}

export interface TrainJob {
  job_id: string;
  status: "running" | "done" | "failed";
  model_id: string | null;
  error: string | null;
}

export interface RankedItem {
  sample_id: string;
  score: number;
  thumbnail: string;
}

export interface QueryResponse {
  query: string;
  engine: EngineKind;
  models: string[];
  ranked: RankedItem[];
  timing_ms: number;
}

export interface MetricStats {
  mean: number | null;
  std: number | null;
}

export interface ReportRow {
  query: string;
  k: number;
  engine: string;
  trials: number;
  bep: MetricStats;
  "p@5": MetricStats;
  "p@10": MetricStats;
  "p@20": MetricStats;
}

export class ApiError extends Error {
  readonly status: number;
  /** Trained labels listed by the service on a 409 (untrained query). */
  readonly trained: string[];

  constructor(status: number, message: string, trained: string[] = []) {
    super(message);
    this.status = status;
    this.trained = trained;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = fetch) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const message =
        typeof body.message === "string" ? body.message : resp.statusText;
      const trained = Array.isArray(body.trained) ? body.trained : [];
      throw new ApiError(resp.status, message, trained);
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

  listDatasets(): Promise<{ datasets: string[] }> {
    return this.request("/v1/datasets");
  }

  listSamples(
    dataset: string,
    opts: { unlabeledFor?: string; garment?: Garment } = {},
  ): Promise<SampleListing> {
    const params = new URLSearchParams();
    if (opts.unlabeledFor) params.set("unlabeled_for", opts.unlabeledFor);
    if (opts.garment) params.set("garment", opts.garment);
    const qs = params.toString();
    return this.request(
      `/v1/datasets/${encodeURIComponent(dataset)}/samples${qs ? "?" + qs : ""}`,
    );
  }

  submitAnnotation(
    dataset: string,
    payload: AnnotationPayload,
  ): Promise<AnnotationResponse> {
    return this.post(
      `/v1/datasets/${encodeURIComponent(dataset)}/annotations`,
      payload,
    );
  }

  trainModel(req: TrainRequest): Promise<TrainJob> {
    return this.post("/v1/models/train", req);
  }

  getJob(jobId: string): Promise<TrainJob> {
    return this.request(`/v1/models/jobs/${encodeURIComponent(jobId)}`);
  }

  listModels(): Promise<{ models: string[] }> {
    return this.request("/v1/models");
  }

  runQuery(
    dataset: string,
    text: string,
    opts: { engine?: EngineKind; topN?: number } = {},
  ): Promise<QueryResponse> {
    return this.post("/v1/query", {
      dataset,
      text,
      engine: opts.engine ?? "generative",
      top_n: opts.topN ?? 10,
    });
  }

  getReport(reportId: string): Promise<ReportRow[]> {
    return this.request(`/v1/eval/reports/${encodeURIComponent(reportId)}`);
  }

  sampleImageUrl(sampleId: string, dataset: string): string {
    return (
      `${this.base}/v1/samples/${encodeURIComponent(sampleId)}/image` +
      `?dataset=${encodeURIComponent(dataset)}`
    );
  }
}
