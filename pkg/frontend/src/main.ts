import { ApiClient } from "./api.js";
import { AnnotationController, Tab, View } from "./controller.js";
import { guidelineFor } from "./guidelines.js";
import { DecisionQueue } from "./queue.js";
import { CLASS_MENU, Progress, UNLABELABLE, UiTask } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

class DomView implements View {
  private api: ApiClient;

  constructor(api: ApiClient) {
    this.api = api;
  }

  showTask(task: UiTask): void {
    el("empty-state").hidden = true;
    el("task-card").hidden = false;
    el<HTMLImageElement>("patch").src = this.api.patchUrl(task);
    el("proposed").textContent = task.proposed_label;
    el("remaining").textContent = String(task.remaining);
    const menu = el("class-menu");
    menu.replaceChildren();
    const entries: Array<[string, string]> = CLASS_MENU.map((name, i) => [
      `${i + 1}`,
      name,
    ]);
    entries.push(["U", UNLABELABLE]);
    for (const [keyLabel, name] of entries) {
      const li = document.createElement("li");
      li.textContent = `[${keyLabel}] ${name}`;
      li.title = guidelineFor(name);
      if (name === task.proposed_label) {
        li.classList.add("proposed");
      }
      menu.appendChild(li);
    }
  }

  showEmptyState(progress: Progress | null): void {
    el("task-card").hidden = true;
    const empty = el("empty-state");
    empty.hidden = false;
    empty.textContent = progress
      ? `No open tasks. Iteration ${progress.iteration_index}: ` +
        `${progress.tasks_resolved}/${progress.tasks_total} resolved.`
      : "No open tasks.";
  }

  showDashboard(progress: Progress): void {
    el("iteration").textContent = String(progress.iteration_index);
    el("resolved").textContent =
      `${progress.tasks_resolved} / ${progress.tasks_total}`;
    el("consistent").textContent = String(progress.consistent_count);
    el("inconsistent").textContent = String(progress.inconsistent_count);
    el("excluded").textContent = String(progress.excluded_count);
    el("saved").textContent =
      `${(100 * progress.labor_saved_so_far).toFixed(1)}%`;
    el("complete").textContent = progress.complete ? "complete" : "running";
  }

  showToast(message: string): void {
    const toast = el("toast");
    toast.textContent = message;
    toast.hidden = false;
    window.setTimeout(() => {
      toast.hidden = true;
    }, 2500);
  }

  setTab(tab: Tab): void {
    el("task-view").hidden = tab !== "task";
    el("dashboard-view").hidden = tab !== "dashboard";
  }
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const token =
    params.get("token") ?? window.prompt("annotator token") ?? "";
  const api = new ApiClient(token, (url, init) =>
    window.fetch(url, init),
  );
  const controller = new AnnotationController(
    api,
    new DecisionQueue(api),
    new DomView(api),
  );
  window.addEventListener("keydown", (event) => {
    void controller.handleKey(event.key);
  });
  void controller.start();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
