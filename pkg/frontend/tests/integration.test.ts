// End-to-end UI flow against the real annotation service: lease and complete
// one filter task (4 removes, 11 keeps) and one label task ((1, 0) bits),
// then confirm the dashboard matrix preview reflects both.
//
// The service is spawned from the Python package with the single-record
// worked-example corpus; the DOM runs under jsdom with node's fetch.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Dashboard } from "../src/dashboard.js";
import { FilterScreen } from "../src/filterScreen.js";
import { LabelScreen } from "../src/labelScreen.js";
import { VerdictStore } from "../src/state.js";

const PORT = 8300 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const CORPUS = join(__dirname, "..", "..", "tests", "data", "service_corpus.jsonl");

let service: ChildProcess;

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 30000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/progress`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("annotation service did not come up within 30s");
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "kitgi-ui-"));
  service = spawn(
    "python3",
    [
      "-m", "kitgi.cli", "serve",
      "-d", CORPUS,
      "--data-dir", dataDir,
      "--host", "127.0.0.1",
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForService();
});

afterAll(() => {
  service?.kill("SIGTERM");
});

beforeEach(() => {
  localStorage.clear();
  document.body.innerHTML = "";
});

describe("UI flows against the live service", () => {
  it("completes a filter task, a label task, and updates the dashboard", async () => {
    const api = new ApiClient(BASE);
    const store = new VerdictStore();

    // -- filter task: the worked example, 4 removes / 11 keeps --------------
    const filterRoot = document.createElement("div");
    document.body.appendChild(filterRoot);
    const filter = new FilterScreen(filterRoot, api, store, "ui-tester");
    await filter.start();

    const relations = filter.relations();
    expect(relations).toHaveLength(15);
    expect(filterRoot.querySelectorAll("tr[data-relation-id]")).toHaveLength(15);

    // The service suggests watch->look and window->looking; accept them and
    // add the two semantic-judgment removals the tool cannot see.
    filter.acceptSuggestions();
    const byPair = new Map(relations.map((r) => [`${r.head.surface}:${r.tail}`, r.id]));
    filter.decide(byPair.get("look:see")!, "Remove");
    filter.decide(byPair.get("look:seeing")!, "Remove");

    const verdicts = Object.values(filter.verdicts());
    expect(verdicts.filter((v) => v.verdict === "Remove")).toHaveLength(4);
    expect(verdicts.filter((v) => v.verdict === "Keep")).toHaveLength(11);

    expect(await filter.submit()).toBe(true);
    expect(filterRoot.querySelector(".status")!.textContent).toContain("11 relations kept");
    expect(filterRoot.querySelector(".empty")!.textContent).toContain("no open filtering tasks");

    // -- label task: commonsense 1, auto coverage 0 (watch missing) ---------
    const labelRoot = document.createElement("div");
    document.body.appendChild(labelRoot);
    const label = new LabelScreen(labelRoot, api, "ui-tester");
    await label.loadNext();

    expect(labelRoot.querySelector(".sentence")!.textContent).toBe(
      "A man is looking at a window.",
    );
    expect(label.coverageAutoBit()).toBe(0);
    expect(labelRoot.querySelector(".chip.missing")!.textContent).toBe("watch");

    labelRoot.querySelector<HTMLButtonElement>("button.cs-1")!.click();
    expect(await label.submit()).toBe(true);

    // -- dashboard: both completions visible, matrix preview updated --------
    const dashRoot = document.createElement("div");
    document.body.appendChild(dashRoot);
    const dashboard = new Dashboard(dashRoot, api, 100000);
    await dashboard.refresh();

    const filterCard = dashRoot.querySelector('[data-stage="FilterRelations"]')!;
    expect(filterCard.querySelector(".completed")!.textContent).toBe("1");
    expect(filterCard.querySelector(".open")!.textContent).toBe("0");
    const labelCard = dashRoot.querySelector('[data-stage="LabelSentence"]')!;
    expect(labelCard.querySelector(".completed")!.textContent).toBe("1");

    const matrix = dashRoot.querySelector('[data-condition="FilteredKnowledge"]')!;
    expect(matrix.querySelector(".n10")!.textContent).toBe("1");
    expect(matrix.querySelector(".n11")!.textContent).toBe("0");

    // The stored record now carries the (1, 0) annotation and 11 kept
    // relations, straight from the export endpoint.
    const exported = await fetch(`${BASE}/export`).then((r) => r.text());
    const record = JSON.parse(exported.trim().split("\n")[0]);
    expect(record.annotations.FilteredKnowledge.commonsense).toBe(1);
    expect(record.annotations.FilteredKnowledge.coverage).toBe(0);
    const kept = Object.values(record.filtered_knowledge).flat();
    expect(kept).toHaveLength(11);
  });
});
