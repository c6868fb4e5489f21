// DOM rendering for the review app. Browser-only; all state comes from the
// controller and the stats endpoint.

import type { ControllerState } from "./controller.js";
import type { DashboardRow, ProgressBar } from "./stats.js";
import type { ClipView } from "./types.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function clipCard(label: string, clip: ClipView): HTMLElement {
  const card = el("div", "clip");
  card.appendChild(el("h3", undefined, `${label}: ${clip.title || clip.video}`));
  card.appendChild(el("p", "meta", `${clip.biryani} · ${clip.timestamp}s`));
  const strip = el("div", "frames");
  for (const frame of clip.frames) {
    const img = document.createElement("img");
    img.loading = "lazy"; // annotators page through hundreds of items
    img.src = `/${frame}`;
    img.alt = `${label} frame`;
    strip.appendChild(img);
  }
  card.appendChild(strip);
  return card;
}

export function renderItem(host: HTMLElement, state: ControllerState): void {
  host.replaceChildren();
  if (state.banner) {
    host.appendChild(el("div", `banner ${state.connection}`, state.banner));
  }
  if (state.phase === "loading") {
    host.appendChild(el("p", "status", "loading…"));
    return;
  }
  if (state.phase === "error") {
    host.appendChild(el("p", "status error", state.banner ?? "error"));
    return;
  }
  if (state.phase === "done") {
    const done = el("div", "done");
    done.appendChild(el("h2", undefined, "All assigned items reviewed"));
    const link = document.createElement("a");
    link.href = "#stats";
    link.textContent = "View session summary";
    done.appendChild(link);
    host.appendChild(done);
    return;
  }
  const item = state.current;
  if (!item) return;
  const header = el("div", "item-header");
  header.appendChild(el("h2", undefined, item.action_class));
  header.appendChild(
    el("p", "progress-line", `${state.done}/${state.total} reviewed` +
      (state.queueDepth ? ` · ${state.queueDepth} queued` : "")),
  );
  host.appendChild(header);
  host.appendChild(el("p", "variation", `Proposed difference: ${item.variation}`));
  const clips = el("div", "clips");
  clips.appendChild(clipCard("Video A", item.clip_a));
  clips.appendChild(clipCard("Video B", item.clip_b));
  host.appendChild(clips);
  const model = el("div", "model-verdict");
  model.appendChild(
    el("p", undefined,
      `Model answer: (${item.model.answer}) confidence ${item.model.confidence}`),
  );
  model.appendChild(el("p", "explanation", item.model.explanation));
  host.appendChild(model);
}

export function renderDashboard(
  host: HTMLElement,
  rows: DashboardRow[],
  bars: ProgressBar[],
): void {
  host.replaceChildren();
  const table = el("table", "stats-table");
  const head = el("tr");
  for (const title of ["Category", "Confirmed", "Rejected", "Unsure", "Correct", "Incorrect"]) {
    head.appendChild(el("th", undefined, title));
  }
  table.appendChild(head);
  for (const row of rows) {
    const tr = el("tr");
    tr.appendChild(el("td", undefined, row.category));
    tr.appendChild(el("td", undefined, String(row.confirmed)));
    tr.appendChild(el("td", undefined, String(row.rejected)));
    tr.appendChild(el("td", undefined, String(row.unsure)));
    tr.appendChild(el("td", undefined, row.correctPct));
    tr.appendChild(el("td", undefined, row.incorrectPct));
    table.appendChild(tr);
  }
  host.appendChild(table);
  const barHost = el("div", "bars");
  for (const bar of bars) {
    const line = el("div", "bar-line");
    line.appendChild(el("span", "bar-label", `${bar.annotator} (${bar.done}/${bar.assigned})`));
    const track = el("div", "bar-track");
    const fill = el("div", "bar-fill");
    fill.style.width = `${Math.round(bar.fraction * 100)}%`;
    track.appendChild(fill);
    line.appendChild(track);
    barHost.appendChild(line);
  }
  host.appendChild(barHost);
}
