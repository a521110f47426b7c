/**
 * Pure view logic: which controls are live for a given status, when the
 * threshold banner shows, and how payload values become display text.
 * Keeping these as plain functions makes the gating rules testable without
 * a DOM.
 */

import type { ExperimentStatus, LifecycleCommand, ReportPayload } from "./types.js";

const LEGAL_COMMANDS: Record<ExperimentStatus, LifecycleCommand[]> = {
  draft: ["start"],
  running: ["pause", "stop"],
  paused: ["resume", "stop"],
  stopped: [],
  // a completed experiment may be resumed to keep observing past the threshold
  completed: ["resume"],
};

export const ALL_COMMANDS: LifecycleCommand[] = ["start", "pause", "resume", "stop"];

export function legalCommands(status: ExperimentStatus): LifecycleCommand[] {
  return LEGAL_COMMANDS[status] ?? [];
}

export function isCommandLegal(status: ExperimentStatus, command: LifecycleCommand): boolean {
  return legalCommands(status).includes(command);
}

export function canApplyWinner(state: { threshold_crossed: boolean }): boolean {
  return state.threshold_crossed;
}

export function showBanner(state: { threshold_crossed: boolean }): boolean {
  return state.threshold_crossed;
}

/** Displayed numbers are the payload values, stringified and untouched. */
export function verbatim(value: number | string | boolean): string {
  return String(value);
}

export function orPlaceholder(value: number | string | null, placeholder = "n/a"): string {
  return value === null ? placeholder : verbatim(value);
}

export function bannerParts(report: ReportPayload): {
  creative: string;
  taId: string;
  probability: string;
} {
  return {
    creative: verbatim(report.best.creative),
    taId: verbatim(report.best.ta_id),
    probability: verbatim(report.best.best_prob),
  };
}

export const APPLY_WINNER_TOOLTIP = "available once the probability threshold is crossed";
