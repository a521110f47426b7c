/**
 * Best-probability trajectory chart: one SVG polyline per creative/audience
 * combination over batches, with the completion threshold as a dashed rule.
 * Geometry only lives here; the numbers plotted come straight from the
 * history payload.
 */

import type { HistoryPayload } from "./types.js";

export interface PhiSeries {
  creative: number;
  taId: number;
  label: string;
  points: Array<{ t: number; phi: number }>;
}

const SVG_NS = "http://www.w3.org/2000/svg";

const SERIES_COLORS = [
  "#2563eb", "#dc2626", "#16a34a", "#9333ea", "#ea580c",
  "#0891b2", "#ca8a04", "#db2777", "#4b5563", "#65a30d",
];

export function phiSeries(history: HistoryPayload): PhiSeries[] {
  const first = history.points[0];
  if (!first) return [];
  const creatives = first.best_prob.length;
  const audiences = creatives > 0 ? first.best_prob[0].length : 0;
  const series: PhiSeries[] = [];
  for (let r = 0; r < creatives; r++) {
    for (let k = 0; k < audiences; k++) {
      series.push({
        creative: r + 1,
        taId: k + 1,
        label: `creative ${r + 1} / audience ${k + 1}`,
        points: history.points.map((point) => ({ t: point.t, phi: point.best_prob[r][k] })),
      });
    }
  }
  return series;
}

export function renderPhiChart(
  history: HistoryPayload,
  threshold: number,
  width = 640,
  height = 240,
): SVGSVGElement {
  const pad = { left: 36, right: 120, top: 10, bottom: 24 };
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "phi-chart");
  svg.setAttribute("data-points", String(history.points.length));

  const series = phiSeries(history);
  const ts = history.points.map((p) => p.t);
  const tMin = ts.length ? Math.min(...ts) : 1;
  const tMax = ts.length ? Math.max(...ts) : 1;
  const x = (t: number) =>
    tMax === tMin
      ? pad.left
      : pad.left + ((t - tMin) / (tMax - tMin)) * (width - pad.left - pad.right);
  const y = (phi: number) => pad.top + (1 - phi) * (height - pad.top - pad.bottom);

  for (const mark of [0, 0.5, 1]) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(pad.left));
    line.setAttribute("x2", String(width - pad.right));
    line.setAttribute("y1", String(y(mark)));
    line.setAttribute("y2", String(y(mark)));
    line.setAttribute("class", "phi-grid");
    svg.appendChild(line);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(pad.left - 6));
    label.setAttribute("y", String(y(mark) + 4));
    label.setAttribute("class", "phi-axis");
    label.setAttribute("text-anchor", "end");
    label.textContent = String(mark);
    svg.appendChild(label);
  }

  const rule = document.createElementNS(SVG_NS, "line");
  rule.setAttribute("x1", String(pad.left));
  rule.setAttribute("x2", String(width - pad.right));
  rule.setAttribute("y1", String(y(threshold)));
  rule.setAttribute("y2", String(y(threshold)));
  rule.setAttribute("class", "phi-threshold");
  rule.setAttribute("data-threshold", String(threshold));
  svg.appendChild(rule);

  series.forEach((s, index) => {
    const polyline = document.createElementNS(SVG_NS, "polyline");
    polyline.setAttribute(
      "points",
      s.points.map((p) => `${x(p.t)},${y(p.phi)}`).join(" "),
    );
    polyline.setAttribute("fill", "none");
    polyline.setAttribute("stroke", SERIES_COLORS[index % SERIES_COLORS.length]);
    polyline.setAttribute("stroke-width", "1.5");
    polyline.setAttribute("data-series", s.label);
    svg.appendChild(polyline);

    const legend = document.createElementNS(SVG_NS, "text");
    legend.setAttribute("x", String(width - pad.right + 8));
    legend.setAttribute("y", String(pad.top + 12 + index * 14));
    legend.setAttribute("fill", SERIES_COLORS[index % SERIES_COLORS.length]);
    legend.setAttribute("class", "phi-legend");
    legend.textContent = s.label;
    svg.appendChild(legend);
  });

  return svg;
}
