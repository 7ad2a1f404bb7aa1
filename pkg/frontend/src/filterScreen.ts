import { ApiClient, ApiError } from "./api.js";
import { VerdictStore } from "./state.js";
import {
  DecisionSource,
  FilterPayload,
  RelationView,
  STAGE_FILTER,
  SuggestionView,
  TaskView,
  Verdict,
} from "./types.js";

// Stage 1 screen: one relation row per retrieved relation, each needing an
// explicit Keep or Remove before the task can be submitted. Suggestion badges
// show the reason and the matched evidence so the annotator can judge them.
export class FilterScreen {
  private task: TaskView<FilterPayload> | null = null;
  private statusText = "";
  private statusKind: "info" | "warn" | "error" = "info";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly store: VerdictStore,
    private readonly annotator: string,
  ) {}

  async start(): Promise<void> {
    const cached = this.store.loadCachedTask(STAGE_FILTER, this.annotator);
    if (cached) {
      this.task = cached as TaskView<FilterPayload>;
      this.render();
      this.setStatus("resumed task in progress", "info");
      return;
    }
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    let task: TaskView | null;
    try {
      task = await this.api.nextTask(STAGE_FILTER, this.annotator);
    } catch (err) {
      this.renderEmpty("service unreachable; retry when it is back");
      return;
    }
    this.task = task as TaskView<FilterPayload> | null;
    if (this.task === null) {
      this.renderEmpty("no open filtering tasks");
      return;
    }
    this.store.cacheTask(STAGE_FILTER, this.annotator, this.task);
    this.render();
  }

  relations(): RelationView[] {
    if (!this.task) return [];
    return Object.values(this.task.payload.relations).flat();
  }

  private suggestionFor(relationId: string): SuggestionView | undefined {
    return this.task?.payload.suggestions.find((s) => s.relation_id === relationId);
  }

  private render(): void {
    const task = this.task;
    if (!task) return;
    this.root.innerHTML = "";

    const header = document.createElement("div");
    header.className = "task-header";
    const chips = task.payload.concept_set.concepts
      .map((c) => `<span class="chip">${c.surface.replace(/_/g, " ")}</span>`)
      .join(" ");
    header.innerHTML = `<span class="task-id">${task.task_id}</span> ${chips}`;
    this.root.appendChild(header);

    const table = document.createElement("table");
    table.className = "relations";
    table.innerHTML =
      "<thead><tr><th>#</th><th>concept</th><th>relation</th><th>tail</th>" +
      "<th>suggestion</th><th>verdict</th></tr></thead>";
    const body = document.createElement("tbody");
    for (const rel of this.relations()) {
      body.appendChild(this.renderRow(rel));
    }
    table.appendChild(body);
    this.root.appendChild(table);

    const actions = document.createElement("div");
    actions.className = "actions";
    const acceptAll = document.createElement("button");
    acceptAll.className = "accept-suggestions";
    acceptAll.textContent = `accept ${task.payload.suggestions.length} suggestions`;
    acceptAll.addEventListener("click", () => this.acceptSuggestions());
    const submit = document.createElement("button");
    submit.className = "submit";
    submit.textContent = "submit decisions";
    submit.addEventListener("click", () => void this.submit());
    actions.append(acceptAll, submit);
    this.root.appendChild(actions);

    this.root.appendChild(this.statusElement());
    this.refresh();
  }

  private statusElement(): HTMLElement {
    const status = document.createElement("div");
    status.className = "status";
    status.textContent = this.statusText;
    status.dataset.kind = this.statusKind;
    return status;
  }

  private renderRow(rel: RelationView): HTMLTableRowElement {
    const row = document.createElement("tr");
    row.dataset.relationId = rel.id;
    const suggestion = this.suggestionFor(rel.id);
    const badge = suggestion
      ? `<span class="badge" title="evidence: ${suggestion.evidence}">` +
        `${suggestion.reason} (${suggestion.evidence})</span>`
      : "";
    row.innerHTML =
      `<td>${rel.rank}</td><td>${rel.head.surface.replace(/_/g, " ")}</td>` +
      `<td>${rel.rel_type}</td><td>${rel.tail.replace(/_/g, " ")}</td><td>${badge}</td>`;
    const cell = document.createElement("td");
    for (const verdict of ["Keep", "Remove"] as Verdict[]) {
      const button = document.createElement("button");
      button.className = verdict.toLowerCase();
      button.textContent = verdict;
      button.addEventListener("click", () => this.decide(rel.id, verdict, "Human"));
      cell.appendChild(button);
    }
    row.appendChild(cell);
    return row;
  }

  decide(relationId: string, verdict: Verdict, source: DecisionSource = "Human"): void {
    if (!this.task) return;
    this.store.setVerdict(this.task.task_id, relationId, verdict, source);
    this.refresh();
  }

  acceptSuggestions(): void {
    if (!this.task) return;
    const suggested = new Set(this.task.payload.suggestions.map((s) => s.relation_id));
    for (const rel of this.relations()) {
      this.decide(rel.id, suggested.has(rel.id) ? "Remove" : "Keep", "Suggested");
    }
  }

  verdicts(): Record<string, { verdict: Verdict }> {
    if (!this.task) return {};
    return this.store.loadVerdicts(this.task.task_id);
  }

  private undecidedIds(): string[] {
    const decided = this.verdicts();
    return this.relations()
      .map((r) => r.id)
      .filter((id) => !(id in decided));
  }

  private refresh(): void {
    if (!this.task) return;
    const decided = this.store.loadVerdicts(this.task.task_id);
    for (const row of this.root.querySelectorAll<HTMLTableRowElement>("tr[data-relation-id]")) {
      const id = row.dataset.relationId!;
      const choice = decided[id];
      row.classList.toggle("undecided", !choice);
      row.querySelector("button.keep")?.classList.toggle(
        "active",
        choice?.verdict === "Keep",
      );
      row.querySelector("button.remove")?.classList.toggle(
        "active",
        choice?.verdict === "Remove",
      );
    }
    const submit = this.root.querySelector<HTMLButtonElement>("button.submit");
    if (submit) submit.disabled = this.undecidedIds().length > 0;
  }

  async submit(): Promise<boolean> {
    const task = this.task;
    if (!task) return false;
    const undecided = this.undecidedIds();
    if (undecided.length > 0) {
      for (const id of undecided) {
        this.root
          .querySelector(`tr[data-relation-id="${id}"]`)
          ?.classList.add("blocking");
      }
      this.setStatus(`${undecided.length} relation(s) still undecided`, "warn");
      return false;
    }
    const decisions = Object.values(this.store.loadVerdicts(task.task_id));
    try {
      const result = await this.api.submitDecisions(task.task_id, this.annotator, decisions);
      this.store.clearVerdicts(task.task_id);
      this.store.clearCachedTask(STAGE_FILTER, this.annotator);
      this.setStatus(`accepted; ${result.filtered_count} relations kept`, "info");
      await this.loadNext();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.code === "LeaseExpired") {
        // Someone else may pick the task up now; drop the stale lease and
        // fetch a fresh task, keeping cached verdicts for the old one.
        this.store.clearCachedTask(STAGE_FILTER, this.annotator);
        this.setStatus("lease expired; reloading a fresh task", "warn");
        await this.loadNext();
        return false;
      }
      // Network or server hiccup: verdicts stay cached for a manual retry.
      this.setStatus(`submit failed (${(err as Error).message}); verdicts kept, retry`, "error");
      return false;
    }
  }

  private renderEmpty(message: string): void {
    this.root.innerHTML = `<div class="empty">${message}</div>`;
    this.root.appendChild(this.statusElement());
  }

  private setStatus(text: string, kind: "info" | "warn" | "error"): void {
    this.statusText = text;
    this.statusKind = kind;
    const status = this.root.querySelector<HTMLElement>(".status");
    if (status) {
      status.textContent = text;
      status.dataset.kind = kind;
    }
  }
}
