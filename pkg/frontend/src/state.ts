import type { DecisionItem, DecisionSource, TaskView, Verdict } from "./types.js";

// Verdicts live in localStorage until the server acknowledges the submit, so
// a reload, crash, or network failure never loses work in progress.
export class VerdictStore {
  constructor(private readonly storage: Storage = window.localStorage) {}

  private verdictKey(taskId: string): string {
    return `kitgi:verdicts:${taskId}`;
  }

  private taskKey(stage: string, annotator: string): string {
    return `kitgi:task:${stage}:${annotator}`;
  }

  loadVerdicts(taskId: string): Record<string, DecisionItem> {
    const raw = this.storage.getItem(this.verdictKey(taskId));
    return raw ? (JSON.parse(raw) as Record<string, DecisionItem>) : {};
  }

  setVerdict(taskId: string, relationId: string, verdict: Verdict, source: DecisionSource): void {
    const all = this.loadVerdicts(taskId);
    all[relationId] = { relation_id: relationId, verdict, source };
    this.storage.setItem(this.verdictKey(taskId), JSON.stringify(all));
  }

  clearVerdicts(taskId: string): void {
    this.storage.removeItem(this.verdictKey(taskId));
  }

  cacheTask(stage: string, annotator: string, task: TaskView): void {
    this.storage.setItem(
      this.taskKey(stage, annotator),
      JSON.stringify({ task, savedAt: Date.now() }),
    );
  }

  // A cached task is only worth resuming while its lease clearly still holds.
  loadCachedTask(stage: string, annotator: string): TaskView | null {
    const raw = this.storage.getItem(this.taskKey(stage, annotator));
    if (!raw) return null;
    try {
      const { task, savedAt } = JSON.parse(raw) as { task: TaskView; savedAt: number };
      const remainingMs = task.lease_seconds_remaining * 1000 - (Date.now() - savedAt);
      if (remainingMs > 5000) return task;
    } catch {
      // fall through to discard
    }
    this.storage.removeItem(this.taskKey(stage, annotator));
    return null;
  }

  clearCachedTask(stage: string, annotator: string): void {
    this.storage.removeItem(this.taskKey(stage, annotator));
  }
}
