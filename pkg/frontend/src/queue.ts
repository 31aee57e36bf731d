import { ApiClient, ApiError } from "./api.js";
import { DecisionAck } from "./types.js";

export interface PendingDecision {
  taskId: string;
  decidedClass: string;
}

/**
 * Submission pipe that survives network loss. Decisions that fail with a
 * network error are queued and flushed in order on the next successful
 * round-trip; the server's idempotent-retry contract makes replays safe.
 * Server-side rejections (4xx) are not retried — they are real outcomes.
 */
export class DecisionQueue {
  private pending: PendingDecision[] = [];

  constructor(private readonly api: ApiClient) {}

  get pendingCount(): number {
    return this.pending.length;
  }

  async submit(
    taskId: string,
    decidedClass: string,
  ): Promise<DecisionAck | "queued"> {
    await this.flush();
    try {
      return await this.api.submitDecision(taskId, decidedClass);
    } catch (err) {
      if (err instanceof ApiError) {
        throw err;
      }
      this.pending.push({ taskId, decidedClass });
      return "queued";
    }
  }

  /** Replay queued decisions in order; stops at the first network failure. */
  async flush(): Promise<void> {
    while (this.pending.length > 0) {
      const next = this.pending[0];
      try {
        await this.api.submitDecision(next.taskId, next.decidedClass);
      } catch (err) {
        if (err instanceof ApiError) {
          // stale conflict or resolved task: drop, it is settled server-side
          this.pending.shift();
          continue;
        }
        return; // still offline
      }
      this.pending.shift();
    }
  }
}
