// Entry point: session selection, keyboard wiring, review loop, dashboard.

import { ReviewApi } from "./api.js";
import { ReviewController } from "./controller.js";
import { renderDashboard, renderItem } from "./dom.js";
import { buildDashboard, buildProgressBars } from "./stats.js";
import type { Verdict } from "./types.js";

const api = new ReviewApi("");
let controller: ReviewController | null = null;
let activeSession: string | null = null;

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

async function refreshSessionList(): Promise<void> {
  const { sessions } = await api.listSessions();
  const select = byId("session-select") as HTMLSelectElement;
  select.replaceChildren();
  for (const session of sessions) {
    const option = document.createElement("option");
    option.value = session.session_id;
    option.textContent = `${session.session_id} (${session.progress.done}/${session.progress.total})`;
    select.appendChild(option);
  }
}

async function startReview(): Promise<void> {
  const select = byId("session-select") as HTMLSelectElement;
  const annotator = (byId("annotator-input") as HTMLInputElement).value.trim();
  if (!select.value || !annotator) return;
  activeSession = select.value;
  controller = new ReviewController(api, activeSession, annotator, (state) => {
    renderItem(byId("review-host"), state);
  });
  await controller.start();
}

async function showStats(): Promise<void> {
  if (!activeSession) return;
  const stats = await api.stats(activeSession);
  renderDashboard(byId("stats-host"), buildDashboard(stats), buildProgressBars(stats.progress));
}

function wire(): void {
  byId("start-button").addEventListener("click", () => void startReview());
  byId("stats-button").addEventListener("click", () => void showStats());
  for (const [buttonId, verdict] of [
    ["confirm-button", "confirmed"],
    ["reject-button", "rejected"],
    ["unsure-button", "unsure"],
  ] as [string, Verdict][]) {
    byId(buttonId).addEventListener("click", () => void controller?.submit(verdict));
  }
  document.addEventListener("keydown", (event) => {
    if ((event.target as HTMLElement)?.tagName === "INPUT") return;
    void controller?.handleKey(event.key);
  });
  window.addEventListener("online", () => void controller?.reconnect());
  void refreshSessionList();
}

document.addEventListener("DOMContentLoaded", wire);
