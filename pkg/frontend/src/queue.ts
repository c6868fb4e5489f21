// Offline verdict queue.
//
// Verdicts submitted while the server is unreachable are parked here in
// submission order and flushed on reconnect. Each entry is sent at most
// once; the server keeps full history and applies latest-wins, so two
// queued verdicts for the same item are both sent, in order.

import type { Verdict } from "./types.js";

export interface QueuedVerdict {
  itemId: string;
  verdict: Verdict;
  queuedAt: number;
}

export interface FlushReport {
  sent: number;
  /** entries the server rejected (e.g. assignment mismatch) */
  rejected: QueuedVerdict[];
  /** true when a network failure interrupted the flush; remainder kept */
  interrupted: boolean;
}

export type SendOutcome = "ok" | "rejected" | "network";

export class OfflineQueue {
  private entries: QueuedVerdict[] = [];
  private flushing = false;

  get size(): number {
    return this.entries.length;
  }

  snapshot(): QueuedVerdict[] {
    return [...this.entries];
  }

  enqueue(itemId: string, verdict: Verdict, now: number = Date.now()): void {
    this.entries.push({ itemId, verdict, queuedAt: now });
  }

  /**
   * Drain the queue through `send`, front to back.
   *
   * - "ok": entry removed.
   * - "rejected": entry removed and reported (the caller rolls back its
   *   optimistic state).
   * - "network": entry stays queued, flush stops; a later reconnect picks
   *   up exactly where this one left off.
   *
   * Re-entrant calls (e.g. two reconnect events) are no-ops while a flush
   * is already running, so nothing is ever sent twice.
   */
  async flush(send: (entry: QueuedVerdict) => Promise<SendOutcome>): Promise<FlushReport> {
    if (this.flushing) {
      return { sent: 0, rejected: [], interrupted: false };
    }
    this.flushing = true;
    const report: FlushReport = { sent: 0, rejected: [], interrupted: false };
    try {
      while (this.entries.length > 0) {
        const entry = this.entries[0];
        const outcome = await send(entry);
        if (outcome === "network") {
          report.interrupted = true;
          break;
        }
        this.entries.shift();
        if (outcome === "ok") {
          report.sent += 1;
        } else {
          report.rejected.push(entry);
        }
      }
    } finally {
      this.flushing = false;
    }
    return report;
  }
}
