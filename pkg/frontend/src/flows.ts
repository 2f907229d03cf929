/**
 * Workbench flows: annotation, training and reporting. Each flow is a
 * thin stateful wrapper over the ApiClient so the DOM layer stays
 * declarative and the logic is testable without a browser.
 */

import {
  ApiClient,
  ApiError,
  type AnnotationPayload,
  type Garment,
  type ReportRow,
  type TrainJob,
  type TrainRequest,
} from "./api";

export interface AnnotateState {
  dataset: string;
  garment: Garment;
  label: string;
  pending: string[];
  labelCounts: Record<string, number>;
}

export class AnnotateFlow {
  constructor(private readonly api: ApiClient) {}

  async start(dataset: string, garment: Garment, label: string): Promise<AnnotateState> {
    const listing = await this.api.listSamples(dataset, {
      unlabeledFor: label,
      garment,
    });
    return {
      dataset,
      garment,
      label,
      pending: listing.samples,
      labelCounts: listing.labels,
    };
  }

  /**
   * Submit one annotation and refresh the running counts. Re-submitting
   * the same (image, garment, label) is a no-op on the service side, so
   * double clicks are safe.
   */
  async submit(state: AnnotateState, imageId: string, author = "ui"): Promise<AnnotateState> {
    const payload: AnnotationPayload = {
      image_id: imageId,
      garment: state.garment,
      color_label: state.label,
      author,
    };
    const resp = await this.api.submitAnnotation(state.dataset, payload);
    return {
      ...state,
      pending: state.pending.filter((id) => id !== imageId),
      labelCounts: resp.labels,
    };
  }
}

export interface TrainOutcome {
  job: TrainJob;
  /** Service error text, shown verbatim when the job failed. */
  errorText: string | null;
}

export class TrainFlow {
  constructor(
    private readonly api: ApiClient,
    private readonly pollDelayMs = 500,
  ) {}

  async run(req: TrainRequest): Promise<TrainOutcome> {
    let job: TrainJob;
    try {
      job = await this.api.trainModel(req);
    } catch (err) {
      if (err instanceof ApiError) {
        return {
          job: { job_id: "", status: "failed", model_id: null, error: err.message },
          errorText: err.message,
        };
      }
      throw err;
    }
    while (job.status === "running") {
      await delay(this.pollDelayMs);
      job = await this.api.getJob(job.job_id);
    }
    return { job, errorText: job.status === "failed" ? job.error : null };
  }
}

export interface ReportTableRow {
  query: string;
  engine: string;
  k: number;
  bep: string;
  p10: string;
}

export function reportTable(rows: ReportRow[]): ReportTableRow[] {
  const fmt = (v: number | null) => (v === null ? "-" : v.toFixed(1));
  return rows.map((r) => ({
    query: r.query,
    engine: r.engine,
    k: r.k,
    bep: fmt(r.bep.mean),
    p10: fmt(r["p@10"].mean),
  }));
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
