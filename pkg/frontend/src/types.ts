// Wire types mirroring the annotation service JSON.

export interface Concept {
  surface: string;
  lang: string;
}

export interface ConceptSetView {
  id: string;
  concepts: Concept[];
}

export interface RelationView {
  id: string;
  head: Concept;
  rel_type: string;
  tail: string;
  weight: number;
  rank: number;
}

export interface SuggestionView {
  relation_id: string;
  reason: string;
  evidence: string;
}

export interface CoverageView {
  bit: number;
  covered: string[];
  missing: string[];
  matches: Record<string, string>;
}

export interface SentenceView {
  text: string;
  condition: string;
  backend_id: string;
}

export interface FilterPayload {
  concept_set: ConceptSetView;
  relations: Record<string, RelationView[]>;
  suggestions: SuggestionView[];
}

export interface LabelPayload {
  concept_set: ConceptSetView;
  condition: string;
  sentence: SentenceView;
  coverage_auto: CoverageView;
}

export interface TaskView<P = FilterPayload | LabelPayload> {
  task_id: string;
  record_id: string;
  stage: string;
  condition: string | null;
  assignee: string | null;
  lease_seconds_remaining: number;
  payload: P;
}

export type Verdict = "Keep" | "Remove";
export type DecisionSource = "Human" | "Suggested";

export interface DecisionItem {
  relation_id: string;
  verdict: Verdict;
  source: DecisionSource;
}

export interface StageCounts {
  total: number;
  completed: number;
  leased: number;
  open: number;
}

export interface MatrixPreview {
  annotated: number;
  cells: Record<string, number>;
}

export interface ProgressView {
  stages: Record<string, StageCounts>;
  matrices: Record<string, MatrixPreview>;
}

export const STAGE_FILTER = "FilterRelations";
export const STAGE_LABEL = "LabelSentence";

export const FAILURE_VARIANTS = [
  "MisleadingKnowledge",
  "UnhelpfulKnowledge",
  "SlightConnection",
] as const;
