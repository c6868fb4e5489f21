// API payload shapes, mirroring the review server's JSON responses.

export type Verdict = "confirmed" | "rejected" | "unsure";

export interface AssignedItem {
  id: string;
  annotator: string;
  category: string | null;
  verdict: Verdict | null;
}

export interface ClipView {
  video: string;
  title: string;
  biryani: string;
  timestamp: string;
  url: string;
  frames: string[];
}

export interface ReviewItemView {
  id: string;
  action_class: string;
  variation: string;
  category?: string;
  clip_a: ClipView;
  clip_b: ClipView;
  model: { answer: string; confidence: number; explanation: string };
}

export interface AnnotatorProgress {
  assigned: number;
  done: number;
}

export interface Progress {
  total: number;
  done: number;
  annotators: Record<string, AnnotatorProgress>;
}

export interface VerdictAck {
  item_id: string;
  effective: Verdict;
  progress: Progress;
}

export interface CategoryStats {
  confirmed: number;
  rejected: number;
  unsure: number;
  correct_pct: number | null;
  incorrect_pct: number | null;
}

export interface StatsResponse {
  categories: Record<string, CategoryStats>;
  progress: Progress;
}

export interface SessionSummary {
  session_id: string;
  progress: Progress;
}
