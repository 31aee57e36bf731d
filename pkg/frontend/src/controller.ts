import { ApiClient, ApiError } from "./api.js";
import { DecisionQueue } from "./queue.js";
import { CLASS_MENU, Progress, UNLABELABLE, UiTask } from "./types.js";

export type Tab = "task" | "dashboard";

/** Render hooks the controller drives; the DOM layer implements these. */
export interface View {
  showTask(task: UiTask): void;
  showEmptyState(progress: Progress | null): void;
  showDashboard(progress: Progress): void;
  showToast(message: string): void;
  setTab(tab: Tab): void;
}

/**
 * Keyboard-first task flow over the annotation service.
 *
 * Key map: Enter confirms the proposed label (a non-forest proposal is
 * confirmed as "other", which projects to non-forest server-side), digits
 * 1-8 pick a class from the fixed menu, "u" flags unlabelable, "d"/"t"
 * switch tabs. Submissions advance optimistically: the next task is
 * requested immediately and a late conflict surfaces as a toast, never as
 * a lost or misdirected decision.
 */
export class AnnotationController {
  private current: UiTask | null = null;
  private inFlight: Promise<void> = Promise.resolve();
  private tab: Tab = "task";

  constructor(
    private readonly api: ApiClient,
    private readonly queue: DecisionQueue,
    private readonly view: View,
  ) {}

  get currentTask(): UiTask | null {
    return this.current;
  }

  async start(): Promise<void> {
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const task = await this.api.nextTask().catch(() => null);
    this.current = task;
    if (task) {
      this.view.showTask(task);
    } else {
      const progress = await this.api.progress().catch(() => null);
      this.view.showEmptyState(progress);
    }
  }

  async showDashboard(): Promise<void> {
    this.tab = "dashboard";
    this.view.setTab("dashboard");
    const progress = await this.api.progress();
    this.view.showDashboard(progress);
  }

  async showTasks(): Promise<void> {
    this.tab = "task";
    this.view.setTab("task");
    await this.refresh();
  }

  /** Route a key press; returns true when the key was handled. */
  async handleKey(key: string): Promise<boolean> {
    if (key === "d") {
      await this.showDashboard();
      return true;
    }
    if (key === "t") {
      await this.showTasks();
      return true;
    }
    if (this.tab !== "task" || this.current === null) {
      return false;
    }
    if (key === "Enter") {
      const cls =
        this.current.proposed_label === "forest" ? "forest" : "other";
      await this.decide(cls);
      return true;
    }
    if (key === "u" || key === "U") {
      await this.decide(UNLABELABLE);
      return true;
    }
    const digit = Number.parseInt(key, 10);
    if (digit >= 1 && digit <= CLASS_MENU.length) {
      await this.decide(CLASS_MENU[digit - 1]);
      return true;
    }
    return false;
  }

  /** Submit for the displayed task only, then advance optimistically. */
  private async decide(decidedClass: string): Promise<void> {
    const task = this.current;
    if (task === null) {
      return;
    }
    this.current = null; // nothing displayed until the next task renders
    const submission = this.queue
      .submit(task.task_id, decidedClass)
      .then((ack) => {
        if (ack === "queued") {
          this.view.showToast("offline: decision queued, will retry");
        }
      })
      .catch((err: unknown) => {
        if (err instanceof ApiError && (err.status === 409 || err.status === 404)) {
          this.view.showToast(`task superseded (${err.status}); skipping`);
          return;
        }
        throw err;
      });
    this.inFlight = submission;
    await submission;
    await this.refresh();
  }

  /** Await the last submission; test and shutdown hook. */
  async settle(): Promise<void> {
    await this.inFlight;
  }
}
