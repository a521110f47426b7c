/**
 * DOM builders. Every numeric cell carries a data-field attribute naming the
 * payload path it displays, and its text content is the payload value passed
 * through String() untouched; the fixture tests lean on both properties.
 */

import { renderPhiChart } from "./chart.js";
import type {
  ExperimentSummary,
  HistoryPayload,
  LifecycleCommand,
  ReportPayload,
} from "./types.js";
import {
  ALL_COMMANDS,
  APPLY_WINNER_TOOLTIP,
  bannerParts,
  canApplyWinner,
  isCommandLegal,
  orPlaceholder,
  showBanner,
  verbatim,
} from "./view.js";

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function field(tag: "td" | "span", path: string, text: string): HTMLElement {
  return el(tag, { "data-field": path }, text);
}

export function renderStatusChip(summary: Pick<ExperimentSummary, "status">): HTMLElement {
  return el("span", { class: `chip chip-${summary.status}`, "data-field": "status" }, summary.status);
}

export function renderEmptyList(): HTMLElement {
  return el("p", { class: "empty-state" }, "No experiments yet. Create one with the CLI or the API.");
}

export function renderListTable(
  summaries: ExperimentSummary[],
  onOpen: (experimentId: string) => void,
): HTMLElement {
  if (summaries.length === 0) return renderEmptyList();
  const head = el(
    "tr",
    {},
    ...["experiment", "kind", "status", "batch", "max P(best)", ""].map((h) => el("th", {}, h)),
  );
  const body = summaries.map((summary, i) => {
    const open = el("button", { class: "link", "data-open": summary.experiment_id }, "open");
    open.addEventListener("click", () => onOpen(summary.experiment_id));
    return el(
      "tr",
      { "data-row": summary.experiment_id },
      field("td", `experiments.${i}.experiment_id`, summary.experiment_id),
      field("td", `experiments.${i}.kind`, summary.kind),
      el("td", {}, renderStatusChip(summary)),
      field("td", `experiments.${i}.t`, verbatim(summary.t)),
      field("td", `experiments.${i}.max_phi`, orPlaceholder(summary.max_phi)),
      el("td", {}, open),
    );
  });
  return el("table", { class: "list-table" }, head, ...body);
}

export interface ControlHandlers {
  onCommand: (command: LifecycleCommand) => void;
  onApplyWinner: () => void;
  /** stop is destructive enough to confirm; injectable for tests */
  confirm?: (question: string) => boolean;
}

export function renderControls(summary: ExperimentSummary, handlers: ControlHandlers): HTMLElement {
  const confirmFn = handlers.confirm ?? ((question: string) => window.confirm(question));
  const bar = el("div", { class: "controls", "data-controls": summary.experiment_id });

  for (const command of ALL_COMMANDS) {
    const legal = isCommandLegal(summary.status, command);
    const button = el("button", { "data-action": command }, command);
    button.disabled = !legal;
    if (!legal) button.title = `not available while ${summary.status}`;
    button.addEventListener("click", () => {
      if (button.disabled) return;
      if (command === "stop" && !confirmFn(`Stop ${summary.experiment_id}? This ends the test.`)) {
        return;
      }
      handlers.onCommand(command);
    });
    bar.appendChild(button);
  }

  const apply = el("button", { "data-action": "apply-winner", class: "primary" }, "apply winner");
  const allowed = canApplyWinner(summary);
  apply.disabled = !allowed;
  if (!allowed) apply.title = APPLY_WINNER_TOOLTIP;
  apply.addEventListener("click", () => {
    if (!apply.disabled) handlers.onApplyWinner();
  });
  bar.appendChild(apply);
  return bar;
}

export function renderBanner(report: ReportPayload): HTMLElement | null {
  if (!showBanner(report)) return null;
  const parts = bannerParts(report);
  return el(
    "div",
    { class: "banner", "data-banner": "threshold-crossed", role: "status" },
    "Threshold crossed: creative ",
    field("span", "best.creative", parts.creative),
    " with audience ",
    field("span", "best.ta_id", parts.taId),
    " is best with probability ",
    field("span", "best.best_prob", parts.probability),
    ".",
  );
}

const COMBINATION_COLUMNS = [
  "creative",
  "audience",
  "CTR",
  "credible interval",
  "P(best)",
  "impressions",
  "clicks",
  "share",
] as const;

export function renderCombinationTable(report: ReportPayload): HTMLElement {
  const head = el("tr", {}, ...COMBINATION_COLUMNS.map((h) => el("th", {}, h)));
  const rows = report.combinations.map((combo, i) => {
    const lo = combo.ctr_ci[0];
    const hi = combo.ctr_ci[1];
    const ciBar = el("div", { class: "ci-bar" });
    // bar geometry scales against the widest upper bound in the table
    const maxHi = Math.max(...report.combinations.map((c) => c.ctr_ci[1]));
    const span = el("div", { class: "ci-span" });
    span.style.left = `${maxHi > 0 ? (lo / maxHi) * 100 : 0}%`;
    span.style.width = `${maxHi > 0 ? ((hi - lo) / maxHi) * 100 : 0}%`;
    ciBar.appendChild(span);
    const ciCell = el(
      "td",
      { class: "ci-cell" },
      field("span", `combinations.${i}.ctr_ci.0`, verbatim(lo)),
      " to ",
      field("span", `combinations.${i}.ctr_ci.1`, verbatim(hi)),
      ciBar,
    );
    const isBest =
      combo.creative === report.best.creative && combo.ta_id === report.best.ta_id;
    return el(
      "tr",
      { class: isBest ? "best-row" : "" },
      field("td", `combinations.${i}.creative`, verbatim(combo.creative)),
      field("td", `combinations.${i}.ta_id`, verbatim(combo.ta_id)),
      field("td", `combinations.${i}.ctr_mean`, verbatim(combo.ctr_mean)),
      ciCell,
      field("td", `combinations.${i}.best_prob`, verbatim(combo.best_prob)),
      field("td", `combinations.${i}.impressions`, verbatim(combo.impressions)),
      field("td", `combinations.${i}.clicks`, verbatim(combo.clicks)),
      field("td", `combinations.${i}.impression_share`, verbatim(combo.impression_share)),
    );
  });
  return el("table", { class: "combo-table" }, head, ...rows);
}

export function renderTrafficShare(report: ReportPayload): HTMLElement {
  const wrap = el("div", { class: "traffic" });
  report.combinations.forEach((combo, i) => {
    const bar = el("div", { class: "traffic-bar" });
    bar.style.width = `${combo.impression_share * 100}%`;
    wrap.appendChild(
      el(
        "div",
        { class: "traffic-row" },
        el("span", { class: "traffic-label" }, `creative ${combo.creative} / audience ${combo.ta_id}`),
        bar,
        field("span", `combinations.${i}.impression_share`, verbatim(combo.impression_share)),
      ),
    );
  });
  return wrap;
}

export function renderTotals(report: ReportPayload): HTMLElement {
  return el(
    "dl",
    { class: "totals" },
    el("dt", {}, "impressions"),
    el("dd", {}, field("span", "totals.impressions", verbatim(report.totals.impressions))),
    el("dt", {}, "clicks"),
    el("dd", {}, field("span", "totals.clicks", verbatim(report.totals.clicks))),
    el("dt", {}, "cost"),
    el("dd", {}, field("span", "totals.cost", verbatim(report.totals.cost))),
    el("dt", {}, "value of experimentation"),
    el(
      "dd",
      {},
      field(
        "span",
        "value_of_experimentation",
        orPlaceholder(report.value_of_experimentation, "pending"),
      ),
    ),
    el("dt", {}, "value of adaptive design"),
    el(
      "dd",
      {},
      field(
        "span",
        "value_of_adaptive_design",
        orPlaceholder(report.value_of_adaptive_design, "pending"),
      ),
    ),
  );
}

export function renderStaleNotice(lastBatch: number): HTMLElement {
  return el(
    "div",
    { class: "stale", "data-stale": "true", role: "alert" },
    "Connection lost; showing data as of batch ",
    field("span", "batches_run", verbatim(lastBatch)),
    ".",
  );
}

export interface DetailSections {
  header: HTMLElement;
  banner: HTMLElement | null;
  chart: SVGSVGElement;
  table: HTMLElement;
  traffic: HTMLElement;
  totals: HTMLElement;
}

export function renderDetail(
  summary: ExperimentSummary,
  report: ReportPayload,
  history: HistoryPayload,
): DetailSections {
  const header = el(
    "div",
    { class: "detail-header" },
    el("h2", {}, report.experiment_id),
    renderStatusChip(summary),
    el(
      "span",
      { class: "batch-note" },
      "after batch ",
      field("span", "report.batches_run", verbatim(report.batches_run)),
    ),
  );
  return {
    header,
    banner: renderBanner(report),
    chart: renderPhiChart(history, report.threshold),
    table: renderCombinationTable(report),
    traffic: renderTrafficShare(report),
    totals: renderTotals(report),
  };
}

export function toast(message: string, host: HTMLElement = document.body): HTMLElement {
  const note = el("div", { class: "toast", role: "alert" }, message);
  host.appendChild(note);
  setTimeout(() => note.remove(), 4000);
  return note;
}
