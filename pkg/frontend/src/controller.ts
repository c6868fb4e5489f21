// Review session state machine.
//
// Drives one annotator through their assigned items: fetch the earliest
// unverdicted item, advance optimistically on submit, reconcile with the
// server acknowledgment, roll back on rejection, and queue verdicts while
// offline. No verdict or accuracy arithmetic happens here.

import { HttpError, type ReviewClient, isNetworkFailure } from "./api.js";
import { OfflineQueue, type SendOutcome } from "./queue.js";
import type { AssignedItem, ReviewItemView, Verdict } from "./types.js";

export type Phase = "loading" | "reviewing" | "done" | "error";
export type Connection = "online" | "offline";

export interface ControllerState {
  phase: Phase;
  current: ReviewItemView | null;
  currentId: string | null;
  connection: Connection;
  queueDepth: number;
  done: number;
  total: number;
  banner: string | null;
}

const KEY_VERDICTS: Record<string, Verdict> = {
  y: "confirmed",
  n: "rejected",
  u: "unsure",
};

export class ReviewController {
  private items: AssignedItem[] = [];
  private detail: ReviewItemView | null = null;
  private connection: Connection = "online";
  private banner: string | null = null;
  private phase: Phase = "loading";
  private readonly queue = new OfflineQueue();

  constructor(
    private readonly api: ReviewClient,
    private readonly sessionId: string,
    private readonly annotatorId: string,
    private readonly onChange: (state: ControllerState) => void = () => {},
  ) {}

  state(): ControllerState {
    return {
      phase: this.phase,
      current: this.detail,
      currentId: this.detail?.id ?? null,
      connection: this.connection,
      queueDepth: this.queue.size,
      done: this.items.filter((i) => i.verdict !== null).length,
      total: this.items.length,
      banner: this.banner,
    };
  }

  private emit(): void {
    this.onChange(this.state());
  }

  async start(): Promise<void> {
    this.phase = "loading";
    this.emit();
    try {
      const response = await this.api.items(this.sessionId, this.annotatorId);
      this.items = response.items;
    } catch (error) {
      this.phase = "error";
      this.banner = `failed to load session: ${String(error)}`;
      this.emit();
      return;
    }
    await this.showNext();
  }

  /** Earliest assigned item without a verdict (local optimistic state included). */
  private nextUnverdicted(): AssignedItem | null {
    return this.items.find((item) => item.verdict === null) ?? null;
  }

  private async showNext(): Promise<void> {
    const next = this.nextUnverdicted();
    if (next === null) {
      this.phase = "done";
      this.detail = null;
      this.emit();
      return;
    }
    try {
      this.detail = await this.api.itemDetail(next.id);
      this.phase = "reviewing";
    } catch (error) {
      if (isNetworkFailure(error)) {
        // keep a stub view so offline reviewing by id remains possible
        this.detail = {
          id: next.id,
          action_class: "(offline)",
          variation: "(offline)",
          clip_a: emptyClip(),
          clip_b: emptyClip(),
          model: { answer: "", confidence: 0, explanation: "" },
        };
        this.connection = "offline";
        this.phase = "reviewing";
        this.banner = "offline: item details unavailable, verdicts will be queued";
      } else {
        this.phase = "error";
        this.banner = `failed to load item ${next.id}: ${String(error)}`;
      }
    }
    this.emit();
  }

  private setLocalVerdict(itemId: string, verdict: Verdict | null): void {
    const item = this.items.find((i) => i.id === itemId);
    if (item) {
      item.verdict = verdict;
    }
  }

  /** Optimistic submit: advance immediately, reconcile in the background. */
  async submit(verdict: Verdict): Promise<void> {
    if (this.phase !== "reviewing" || this.detail === null) {
      return;
    }
    const itemId = this.detail.id;
    this.banner = null;
    this.setLocalVerdict(itemId, verdict);
    const advance = this.showNext();
    if (this.connection === "offline") {
      this.queue.enqueue(itemId, verdict);
      await advance;
      return;
    }
    try {
      await this.api.submitVerdict(this.sessionId, itemId, this.annotatorId, verdict);
    } catch (error) {
      if (isNetworkFailure(error)) {
        this.connection = "offline";
        this.queue.enqueue(itemId, verdict);
        this.banner = "offline: verdict queued";
      } else {
        // server rejected: undo the optimistic verdict and return to the item
        this.setLocalVerdict(itemId, null);
        this.banner = `verdict rejected by server: ${(error as HttpError).body}`;
        await advance;
        await this.showNext();
        return;
      }
    }
    await advance;
    this.emit();
  }

  handleKey(key: string): Promise<void> | undefined {
    const verdict = KEY_VERDICTS[key.toLowerCase()];
    if (verdict) {
      return this.submit(verdict);
    }
    return undefined;
  }

  /** Flush queued verdicts after connectivity returns. */
  async reconnect(): Promise<void> {
    const report = await this.queue.flush(async (entry): Promise<SendOutcome> => {
      try {
        await this.api.submitVerdict(this.sessionId, entry.itemId, this.annotatorId, entry.verdict);
        return "ok";
      } catch (error) {
        return isNetworkFailure(error) ? "network" : "rejected";
      }
    });
    for (const rejected of report.rejected) {
      this.setLocalVerdict(rejected.itemId, null);
    }
    if (report.interrupted) {
      this.banner = "still offline: will retry remaining verdicts";
    } else {
      this.connection = "online";
      this.banner = report.rejected.length
        ? `${report.rejected.length} queued verdict(s) rejected by server`
        : null;
      if (this.phase === "done" && this.nextUnverdicted() !== null) {
        await this.showNext();
        return;
      }
      if (this.phase === "reviewing") {
        await this.showNext();
        return;
      }
    }
    this.emit();
  }

  queueDepth(): number {
    return this.queue.size;
  }
}

function emptyClip() {
  return { video: "", title: "", biryani: "", timestamp: "", url: "", frames: [] };
}
