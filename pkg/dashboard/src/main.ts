/**
 * Application shell: hash routing between the experiment list and a detail
 * view, a poller that refreshes whichever view is active, and command wiring
 * that reports API rejections instead of guessing at state.
 */

import { ApiClient, ApiError } from "./api.js";
import { Poller } from "./poll.js";
import {
  renderControls,
  renderDetail,
  renderListTable,
  renderStaleNotice,
  toast,
} from "./render.js";
import type { LifecycleCommand } from "./types.js";

const api = new ApiClient();

interface Route {
  view: "list" | "detail";
  experimentId?: string;
}

function parseRoute(hash: string): Route {
  const match = /^#\/e\/(.+)$/.exec(hash);
  if (match) return { view: "detail", experimentId: decodeURIComponent(match[1]) };
  return { view: "list" };
}

function root(): HTMLElement {
  const node = document.getElementById("app");
  if (!node) throw new Error("missing #app container");
  return node;
}

let lastGoodBatch: number | null = null;
let staleShown = false;

function markStale(host: HTMLElement): void {
  if (staleShown) return;
  staleShown = true;
  host.prepend(renderStaleNotice(lastGoodBatch ?? 0));
}

function clearStale(host: HTMLElement): void {
  staleShown = false;
  host.querySelector("[data-stale]")?.remove();
}

async function refreshList(host: HTMLElement): Promise<void> {
  try {
    const payload = await api.list();
    clearStale(host);
    const table = renderListTable(payload.experiments, (id) => {
      window.location.hash = `#/e/${encodeURIComponent(id)}`;
    });
    host.replaceChildren(heading("Experiments"), table);
  } catch {
    markStale(host);
  }
}

function heading(text: string): HTMLElement {
  const h = document.createElement("h1");
  h.textContent = text;
  return h;
}

function backLink(): HTMLElement {
  const a = document.createElement("a");
  a.href = "#/";
  a.textContent = "back to all experiments";
  a.className = "back-link";
  return a;
}

async function refreshDetail(host: HTMLElement, experimentId: string): Promise<void> {
  try {
    const summary = await api.summary(experimentId);
    const [report, history] = await Promise.all([
      api.report(experimentId),
      api.history(experimentId),
    ]);
    lastGoodBatch = report.batches_run;
    clearStale(host);

    const sections = renderDetail(summary, report, history);
    const controls = renderControls(summary, {
      onCommand: (command: LifecycleCommand) => runCommand(host, experimentId, command),
      onApplyWinner: () => runApplyWinner(host, experimentId),
    });

    const frame = document.createElement("div");
    frame.className = "detail";
    frame.append(backLink(), sections.header, controls);
    if (sections.banner) frame.append(sections.banner);
    frame.append(sections.chart, sections.table, sections.traffic, sections.totals);
    host.replaceChildren(frame);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      host.replaceChildren(heading("Not found"), backLink());
      return;
    }
    markStale(host);
  }
}

function disableControls(host: HTMLElement): void {
  host
    .querySelectorAll<HTMLButtonElement>(".controls button")
    .forEach((button) => (button.disabled = true));
}

async function runCommand(
  host: HTMLElement,
  experimentId: string,
  command: LifecycleCommand,
): Promise<void> {
  disableControls(host);
  try {
    await api.command(experimentId, command);
  } catch (err) {
    if (err instanceof ApiError) toast(`${command} rejected: ${err.message}`);
    else toast(`${command} failed`);
  }
  await refreshDetail(host, experimentId);
}

async function runApplyWinner(host: HTMLElement, experimentId: string): Promise<void> {
  disableControls(host);
  try {
    const result = await api.applyWinner(experimentId);
    const best = result.best;
    toast(
      best
        ? `Winner applied: creative ${best.creative} for audience ${best.ta_id}.`
        : "Winner applied.",
    );
  } catch (err) {
    if (err instanceof ApiError) toast(`apply winner rejected: ${err.message}`);
    else toast("apply winner failed");
  }
  await refreshDetail(host, experimentId);
}

let poller: Poller | null = null;

function route(): void {
  const host = root();
  poller?.stop();
  staleShown = false;
  const current = parseRoute(window.location.hash);
  if (current.view === "detail" && current.experimentId) {
    const id = current.experimentId;
    poller = new Poller(() => refreshDetail(host, id));
  } else {
    poller = new Poller(() => refreshList(host));
  }
  poller.start();
}

window.addEventListener("hashchange", route);
route();
