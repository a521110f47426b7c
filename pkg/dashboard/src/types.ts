/**
 * Wire types for the experiment API. These mirror the JSON bodies served by
 * the engine's HTTP service field for field; the dashboard renders them
 * verbatim and derives nothing numeric of its own.
 */

export type ExperimentStatus = "draft" | "running" | "paused" | "stopped" | "completed";

export type LifecycleCommand = "start" | "pause" | "resume" | "stop";

export interface BestRef {
  creative: number;
  ta_id: number;
}

export interface BestBlock extends BestRef {
  best_prob: number;
}

export interface SummaryTotals {
  impressions: number;
  clicks: number;
}

export interface ReportTotals extends SummaryTotals {
  cost: number;
}

export interface ExperimentSummary {
  experiment_id: string;
  status: ExperimentStatus;
  t: number;
  batches_run: number;
  kind: string;
  creatives: number;
  target_audiences: number;
  contexts: number;
  threshold: number;
  threshold_crossed: boolean;
  continuing: boolean;
  stop_reason: string | null;
  max_phi: number | null;
  best: BestRef | null;
  totals: SummaryTotals;
}

export interface ListPayload {
  experiments: ExperimentSummary[];
}

export interface CellRow {
  creative: number;
  da_id: number;
  alpha: number;
  beta: number;
  ctr_mean: number;
  ctr_ci: [number, number];
  impressions: number;
  clicks: number;
  cost: number;
  allocation_weight: number;
}

export interface CombinationRow {
  creative: number;
  ta_id: number;
  ctr_mean: number;
  ctr_ci: [number, number];
  best_prob: number;
  impressions: number;
  clicks: number;
  impression_share: number;
}

export interface ReportMetadata {
  draws: number;
  report_seed: number;
  ci_level: number;
  marginals_note: string;
}

export interface ReportPayload {
  experiment_id: string;
  status: ExperimentStatus;
  t: number;
  batches_run: number;
  kind: string;
  threshold: number;
  threshold_crossed: boolean;
  continuing: boolean;
  stop_reason: string | null;
  best: BestBlock;
  cells: CellRow[];
  combinations: CombinationRow[];
  creative_marginals: number[];
  ta_marginals: number[];
  totals: ReportTotals;
  value_of_experimentation: number | null;
  value_of_adaptive_design: number | null;
  posterior: unknown;
  metadata: ReportMetadata;
}

export interface HistoryPoint {
  t: number;
  /** Full best-probability matrix, creatives by audiences. */
  best_prob: number[][];
}

export interface HistoryPayload {
  experiment_id: string;
  status: ExperimentStatus;
  t: number;
  batches: number;
  points: HistoryPoint[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  fields?: Record<string, string>;
}
