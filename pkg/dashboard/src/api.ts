/**
 * Typed client for the experiment service. All dashboard traffic funnels
 * through this module; commands are de-duplicated per experiment so a
 * double-clicked button sends a single request.
 */

import type {
  ApiErrorBody,
  ExperimentSummary,
  HistoryPayload,
  LifecycleCommand,
  ListPayload,
  ReportPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly fields?: Record<string, string>,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ReportOptions {
  level?: number;
  draws?: number;
  reportSeed?: number;
}

export class ApiClient {
  private readonly pending = new Map<string, Promise<ExperimentSummary>>();

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  list(): Promise<ListPayload> {
    return this.request<ListPayload>("/experiments");
  }

  summary(experimentId: string): Promise<ExperimentSummary> {
    return this.request<ExperimentSummary>(`/experiments/${encodeURIComponent(experimentId)}`);
  }

  report(experimentId: string, options: ReportOptions = {}): Promise<ReportPayload> {
    const params = new URLSearchParams();
    if (options.level !== undefined) params.set("level", String(options.level));
    if (options.draws !== undefined) params.set("draws", String(options.draws));
    if (options.reportSeed !== undefined) params.set("report_seed", String(options.reportSeed));
    const query = params.toString();
    return this.request<ReportPayload>(
      `/experiments/${encodeURIComponent(experimentId)}/report${query ? `?${query}` : ""}`,
    );
  }

  history(experimentId: string): Promise<HistoryPayload> {
    return this.request<HistoryPayload>(`/experiments/${encodeURIComponent(experimentId)}/history`);
  }

  command(experimentId: string, action: LifecycleCommand): Promise<ExperimentSummary> {
    return this.post(experimentId, action);
  }

  applyWinner(experimentId: string): Promise<ExperimentSummary> {
    return this.post(experimentId, "apply-winner");
  }

  /** One command in flight per experiment; repeats share the same promise. */
  private post(experimentId: string, action: string): Promise<ExperimentSummary> {
    const inFlight = this.pending.get(experimentId);
    if (inFlight) return inFlight;
    const done = this.request<ExperimentSummary>(
      `/experiments/${encodeURIComponent(experimentId)}/${action}`,
      { method: "POST" },
    ).finally(() => this.pending.delete(experimentId));
    this.pending.set(experimentId, done);
    return done;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch {
      throw new ApiError(0, "unreachable", `cannot reach ${this.baseUrl || "the API"}`);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const err = (body ?? {}) as Partial<ApiErrorBody>;
      throw new ApiError(
        response.status,
        err.code ?? "error",
        err.message ?? `request failed with status ${response.status}`,
        err.fields,
      );
    }
    return body as T;
  }
}
