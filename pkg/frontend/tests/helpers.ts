import type {
  DecisionItem,
  FilterPayload,
  LabelPayload,
  ProgressView,
  TaskView,
} from "../src/types.js";

const CONCEPTS = [
  { surface: "look", lang: "en" },
  { surface: "watch", lang: "en" },
  { surface: "window", lang: "en" },
];

function relation(head: string, tail: string, rank: number) {
  return {
    id: `r-${head}-${tail}`,
    head: { surface: head, lang: "en" },
    rel_type: "RelatedTo",
    tail,
    weight: 3.5 - rank * 0.25,
    rank,
  };
}

export const LWW_TAILS: Record<string, string[]> = {
  look: ["see", "glance", "eyes", "seeing", "view"],
  watch: ["time", "wrist", "clock", "look", "clook"],
  window: ["glass", "opening", "looking", "house", "wall"],
};

export function filterTask(): TaskView<FilterPayload> {
  const relations: FilterPayload["relations"] = {};
  for (const [head, tails] of Object.entries(LWW_TAILS)) {
    relations[head] = tails.map((tail, rank) => relation(head, tail, rank));
  }
  return {
    task_id: "filter:cs-lww",
    record_id: "cs-lww",
    stage: "FilterRelations",
    condition: null,
    assignee: "alice",
    lease_seconds_remaining: 900,
    payload: {
      concept_set: { id: "cs-lww", concepts: CONCEPTS },
      relations,
      suggestions: [
        { relation_id: "r-watch-look", reason: "CrossConceptTail", evidence: "look" },
        { relation_id: "r-window-looking", reason: "CrossConceptStem", evidence: "look" },
      ],
    },
  };
}

export function labelTask(): TaskView<LabelPayload> {
  return {
    task_id: "label:cs-lww:FilteredKnowledge",
    record_id: "cs-lww",
    stage: "LabelSentence",
    condition: "FilteredKnowledge",
    assignee: "alice",
    lease_seconds_remaining: 900,
    payload: {
      concept_set: { id: "cs-lww", concepts: CONCEPTS },
      condition: "FilteredKnowledge",
      sentence: {
        text: "A man is looking at a window.",
        condition: "FilteredKnowledge",
        backend_id: "stub",
      },
      coverage_auto: {
        bit: 0,
        covered: ["look", "window"],
        missing: ["watch"],
        matches: { look: "looking", window: "window" },
      },
    },
  };
}

export function progressFixture(): ProgressView {
  return {
    stages: {
      FilterRelations: { total: 121, completed: 0, leased: 0, open: 121 },
      LabelSentence: { total: 242, completed: 0, leased: 0, open: 242 },
    },
    matrices: {
      NoKnowledge: { annotated: 0, cells: { n11: 0, n10: 0, n01: 0, n00: 0 } },
      FullKnowledge: { annotated: 0, cells: { n11: 0, n10: 0, n01: 0, n00: 0 } },
      FilteredKnowledge: { annotated: 0, cells: { n11: 0, n10: 0, n01: 0, n00: 0 } },
    },
  };
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

export interface StubRoute {
  match: (url: string, method: string) => boolean;
  respond: (body: unknown) => { status: number; json?: unknown };
}

// Tiny fetch stub: first matching route wins; every request is recorded.
export function stubFetch(routes: StubRoute[], log: RecordedRequest[]): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    log.push({ url, method, body });
    for (const route of routes) {
      if (route.match(url, method)) {
        const { status, json } = route.respond(body);
        return new Response(json === undefined ? null : JSON.stringify(json), {
          status,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    throw new Error(`no stub route for ${method} ${url}`);
  }) as typeof fetch;
}

export function jsonRoute(
  urlPart: string,
  json: unknown | ((body: unknown) => unknown),
  status = 200,
  method?: string,
): StubRoute {
  return {
    match: (url, m) => url.includes(urlPart) && (method === undefined || m === method),
    respond: (body) => ({
      status,
      json: typeof json === "function" ? (json as (b: unknown) => unknown)(body) : json,
    }),
  };
}

export function decisionsOf(body: unknown): DecisionItem[] {
  return (body as { decisions: DecisionItem[] }).decisions;
}
