import { ApiClient } from "./api.js";
import { MatrixPreview, ProgressView, StageCounts } from "./types.js";

// Progress dashboard: per-stage queue counts plus a live 2x2 preview of the
// commonsense x coverage matrix per condition, polled from /progress.
export class Dashboard {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly intervalMs: number = 3000,
  ) {}

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async refresh(): Promise<void> {
    let progress: ProgressView;
    try {
      progress = await this.api.progress();
    } catch {
      this.root.innerHTML = '<div class="offline-banner">service offline</div>';
      return;
    }
    this.render(progress);
  }

  private render(progress: ProgressView): void {
    this.root.innerHTML = "";
    const stages = document.createElement("div");
    stages.className = "stage-cards";
    for (const [name, counts] of Object.entries(progress.stages)) {
      stages.appendChild(this.stageCard(name, counts));
    }
    this.root.appendChild(stages);

    const matrices = document.createElement("div");
    matrices.className = "matrix-previews";
    for (const [condition, preview] of Object.entries(progress.matrices)) {
      matrices.appendChild(this.matrixCard(condition, preview));
    }
    this.root.appendChild(matrices);
  }

  private stageCard(name: string, counts: StageCounts): HTMLElement {
    const card = document.createElement("div");
    card.className = "stage-card";
    card.dataset.stage = name;
    card.innerHTML =
      `<h3>${name}</h3>` +
      `<span class="open">${counts.open}</span> open / ` +
      `<span class="leased">${counts.leased}</span> leased / ` +
      `<span class="completed">${counts.completed}</span> completed ` +
      `(of <span class="total">${counts.total}</span>)`;
    return card;
  }

  private matrixCard(condition: string, preview: MatrixPreview): HTMLElement {
    const card = document.createElement("div");
    card.className = "matrix-card";
    card.dataset.condition = condition;
    const c = preview.cells;
    card.innerHTML =
      `<h3>${condition} <small>(${preview.annotated} annotated)</small></h3>` +
      '<table class="matrix"><tr><th></th><th>cov 1</th><th>cov 0</th></tr>' +
      `<tr><th>cs 1</th><td class="n11">${c.n11}</td><td class="n10">${c.n10}</td></tr>` +
      `<tr><th>cs 0</th><td class="n01">${c.n01}</td><td class="n00">${c.n00}</td></tr></table>`;
    return card;
  }
}
