// Dashboard model for the stats view.
//
// Every accuracy figure is passed through from the server response
// verbatim; the only arithmetic here is the width of the progress bars.

import type { Progress, StatsResponse } from "./types.js";

export interface DashboardRow {
  category: string;
  confirmed: number;
  rejected: number;
  unsure: number;
  correctPct: string;
  incorrectPct: string;
}

export interface ProgressBar {
  annotator: string;
  assigned: number;
  done: number;
  fraction: number;
}

const CATEGORY_LABELS: Record<string, string> = {
  detected: "Difference detected",
  no_difference: "No difference",
};

function pct(value: number | null): string {
  return value === null ? "—" : `${value}%`;
}

export function buildDashboard(stats: StatsResponse): DashboardRow[] {
  return Object.entries(stats.categories).map(([category, cell]) => ({
    category: CATEGORY_LABELS[category] ?? category,
    confirmed: cell.confirmed,
    rejected: cell.rejected,
    unsure: cell.unsure,
    correctPct: pct(cell.correct_pct),
    incorrectPct: pct(cell.incorrect_pct),
  }));
}

export function buildProgressBars(progress: Progress): ProgressBar[] {
  return Object.entries(progress.annotators)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([annotator, p]) => ({
      annotator,
      assigned: p.assigned,
      done: p.done,
      fraction: p.assigned === 0 ? 0 : p.done / p.assigned,
    }));
}
