import { DecisionAck, IterationSummary, Progress, UiTask } from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thin typed wrapper over the annotation service's REST endpoints. */
export class ApiClient {
  constructor(
    private readonly token: string,
    private readonly fetchImpl: FetchLike,
    private readonly base = "",
  ) {}

  private headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      "Content-Type": "application/json",
    };
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const res = await this.fetchImpl(this.base + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await res.json().catch(() => ({}));
    if (res.status >= 400) {
      const detail =
        typeof payload === "object" && payload !== null && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : `HTTP ${res.status}`;
      throw new ApiError(res.status, detail);
    }
    return payload as T;
  }

  /** Next open task for this session, or null when the queue is empty. */
  async nextTask(): Promise<UiTask | null> {
    const body = await this.request<UiTask | { task: null }>(
      "GET",
      "/api/tasks/next",
    );
    return "task_id" in body ? body : null;
  }

  submitDecision(taskId: string, decidedClass: string): Promise<DecisionAck> {
    return this.request<DecisionAck>(
      "POST",
      `/api/tasks/${encodeURIComponent(taskId)}/decision`,
      { decided_class: decidedClass },
    );
  }

  progress(): Promise<Progress> {
    return this.request<Progress>("GET", "/api/progress");
  }

  advanceIteration(): Promise<IterationSummary> {
    return this.request<IterationSummary>("POST", "/api/iteration/advance");
  }

  patchUrl(task: UiTask): string {
    return this.base + task.patch_url;
  }
}
