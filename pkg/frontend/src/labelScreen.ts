import { ApiClient, ApiError } from "./api.js";
import { FAILURE_VARIANTS, LabelPayload, STAGE_LABEL, TaskView } from "./types.js";

// Stage 3 screen: the sentence with concept highlighting from the automatic
// coverage check, a binary commonsense verdict, an optional coverage
// override, and an optional failure-variant tag.
export class LabelScreen {
  private task: TaskView<LabelPayload> | null = null;
  private commonsense: number | null = null;
  private coverageOverride: number | null = null;
  private failureVariant: string | null = null;
  private statusText = "";
  private statusKind: "info" | "warn" | "error" = "info";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly annotator: string,
  ) {}

  async loadNext(): Promise<void> {
    this.commonsense = null;
    this.coverageOverride = null;
    this.failureVariant = null;
    let task: TaskView | null;
    try {
      task = await this.api.nextTask(STAGE_LABEL, this.annotator);
    } catch {
      this.renderEmpty("service unreachable");
      return;
    }
    this.task = task as TaskView<LabelPayload> | null;
    if (this.task === null) {
      this.renderEmpty("no open labeling tasks");
      return;
    }
    this.render();
  }

  private renderEmpty(message: string): void {
    this.root.innerHTML = `<div class="empty">${message}</div>`;
    this.root.appendChild(this.statusElement());
  }

  private statusElement(): HTMLElement {
    const status = document.createElement("div");
    status.className = "status";
    status.textContent = this.statusText;
    status.dataset.kind = this.statusKind;
    return status;
  }

  coverageAutoBit(): number {
    return this.task?.payload.coverage_auto.bit ?? 0;
  }

  effectiveCoverage(): number {
    return this.coverageOverride ?? this.coverageAutoBit();
  }

  private highlightedSentence(): string {
    const payload = this.task!.payload;
    const matched = new Set(
      Object.values(payload.coverage_auto.matches).flatMap((m) => m.split(" ")),
    );
    return payload.sentence.text
      .split(/(\s+)/)
      .map((part) => {
        const token = part.toLowerCase().replace(/[^a-z]/g, "");
        if (token && matched.has(token)) {
          return `<mark class="covered">${part}</mark>`;
        }
        return part;
      })
      .join("");
  }

  private render(): void {
    const task = this.task!;
    const payload = task.payload;
    this.root.innerHTML = "";

    const header = document.createElement("div");
    header.className = "task-header";
    const chips = payload.concept_set.concepts
      .map((c) => {
        const missing = payload.coverage_auto.missing.includes(c.surface);
        return `<span class="chip ${missing ? "missing" : "present"}">${c.surface.replace(/_/g, " ")}</span>`;
      })
      .join(" ");
    header.innerHTML = `<span class="task-id">${task.task_id}</span> <span class="condition">${payload.condition}</span> ${chips}`;
    this.root.appendChild(header);

    const sentence = document.createElement("p");
    sentence.className = "sentence";
    sentence.innerHTML = this.highlightedSentence();
    this.root.appendChild(sentence);

    const coverage = document.createElement("div");
    coverage.className = "coverage-auto";
    const missing = payload.coverage_auto.missing;
    coverage.innerHTML =
      `auto coverage: <strong>${payload.coverage_auto.bit}</strong>` +
      (missing.length ? ` (missing: <span class="missing">${missing.join(", ")}</span>)` : "");
    this.root.appendChild(coverage);

    const controls = document.createElement("div");
    controls.className = "controls";

    const csGroup = document.createElement("div");
    csGroup.className = "commonsense";
    csGroup.append("commonsense: ");
    for (const bit of [1, 0]) {
      const button = document.createElement("button");
      button.className = `cs-${bit}`;
      button.textContent = bit === 1 ? "makes sense (1)" : "does not (0)";
      button.addEventListener("click", () => {
        this.commonsense = bit;
        this.refresh();
      });
      csGroup.appendChild(button);
    }
    controls.appendChild(csGroup);

    const covGroup = document.createElement("div");
    covGroup.className = "coverage-override";
    covGroup.append("coverage: ");
    const select = document.createElement("select");
    select.innerHTML =
      `<option value="">auto (${payload.coverage_auto.bit})</option>` +
      '<option value="1">override: 1</option><option value="0">override: 0</option>';
    select.addEventListener("change", () => {
      this.coverageOverride = select.value === "" ? null : Number(select.value);
      this.refresh();
    });
    covGroup.appendChild(select);
    controls.appendChild(covGroup);

    const variantGroup = document.createElement("div");
    variantGroup.className = "variant";
    variantGroup.append("failure variant: ");
    const variantSelect = document.createElement("select");
    variantSelect.innerHTML =
      '<option value="">none</option>' +
      FAILURE_VARIANTS.map((v) => `<option value="${v}">${v}</option>`).join("");
    variantSelect.addEventListener("change", () => {
      this.failureVariant = variantSelect.value || null;
    });
    variantGroup.appendChild(variantSelect);
    controls.appendChild(variantGroup);

    const note = document.createElement("input");
    note.className = "note";
    note.placeholder = "note (optional)";
    controls.appendChild(note);

    const submit = document.createElement("button");
    submit.className = "submit";
    submit.textContent = "submit label";
    submit.addEventListener("click", () => void this.submit(note.value || null));
    controls.appendChild(submit);

    this.root.appendChild(controls);

    this.root.appendChild(this.statusElement());
    this.refresh();
  }

  private refresh(): void {
    this.root.querySelector("button.cs-1")?.classList.toggle("active", this.commonsense === 1);
    this.root.querySelector("button.cs-0")?.classList.toggle("active", this.commonsense === 0);
    // The variant tag only applies to failures, mirroring the server check.
    const failing = this.commonsense === 0 || this.effectiveCoverage() === 0;
    const variantSelect = this.root.querySelector<HTMLSelectElement>(".variant select");
    if (variantSelect) {
      variantSelect.disabled = !failing;
      if (!failing) {
        variantSelect.value = "";
        this.failureVariant = null;
      }
    }
    const submit = this.root.querySelector<HTMLButtonElement>("button.submit");
    if (submit) submit.disabled = this.commonsense === null;
  }

  async submit(note: string | null = null): Promise<boolean> {
    const task = this.task;
    if (!task || this.commonsense === null) {
      this.setStatus("pick a commonsense verdict first", "warn");
      return false;
    }
    try {
      await this.api.submitLabel(task.task_id, this.annotator, {
        commonsense: this.commonsense,
        coverage_override: this.coverageOverride,
        failure_variant: this.failureVariant,
        note,
      });
      this.setStatus("label stored", "info");
      await this.loadNext();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.code === "LeaseExpired") {
        this.setStatus("lease expired; reloading a fresh task", "warn");
        await this.loadNext();
        return false;
      }
      this.setStatus(`submit failed (${(err as Error).message}); retry`, "error");
      return false;
    }
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
