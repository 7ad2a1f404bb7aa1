import type { DecisionItem, ProgressView, TaskView } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly detail?: unknown,
  ) {
    super(message);
  }
}

interface LabelBody {
  commonsense: number;
  coverage_override?: number | null;
  failure_variant?: string | null;
  note?: string | null;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok && response.status !== 204) {
      let code = "HttpError";
      let message = `${response.status}`;
      let detail: unknown;
      try {
        const body = await response.json();
        code = body?.error?.code ?? code;
        message = body?.error?.message ?? message;
        detail = body?.error?.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(code, message, response.status, detail);
    }
    return response;
  }

  async nextTask(stage: string, annotator: string): Promise<TaskView | null> {
    const params = new URLSearchParams({ stage, annotator });
    const response = await this.request(`/tasks/next?${params}`);
    if (response.status === 204) return null;
    return (await response.json()) as TaskView;
  }

  async submitDecisions(
    taskId: string,
    annotatorId: string,
    decisions: DecisionItem[],
  ): Promise<{ accepted: boolean; filtered_count: number }> {
    const response = await this.request(`/tasks/${taskId}/decisions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, decisions }),
    });
    return await response.json();
  }

  async submitLabel(
    taskId: string,
    annotatorId: string,
    body: LabelBody,
  ): Promise<{ accepted: boolean }> {
    const response = await this.request(`/tasks/${taskId}/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, ...body }),
    });
    return await response.json();
  }

  async progress(): Promise<ProgressView> {
    const response = await this.request("/progress");
    return (await response.json()) as ProgressView;
  }
}
