"""Stage 1: removal suggestions, filter application, relation statistics.

Suggestions are advisory by design. They flag relations a reproducible
lexical test can justify (tail equals or stem-matches another concept in the
set); anything requiring semantic judgment is left to the human reviewer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .coverage import stem
from .model import (
    ConceptSet,
    FilterDecision,
    KitgiRecord,
    KnowledgeBundle,
    Relation,
    Verdict,
    resolve_decisions,
)


class UnknownRelationError(Exception):
    pass


class EmptyCorpusError(Exception):
    pass


class SuggestionReason(Enum):
    CROSS_CONCEPT_TAIL = "CrossConceptTail"
    CROSS_CONCEPT_STEM = "CrossConceptStem"
    SELF_PARAPHRASE = "SelfParaphrase"


_REASON_ORDER = {
    SuggestionReason.CROSS_CONCEPT_TAIL: 0,
    SuggestionReason.CROSS_CONCEPT_STEM: 1,
    SuggestionReason.SELF_PARAPHRASE: 2,
}


@dataclass(frozen=True)
class RemovalSuggestion:
    relation_id: str
    reason: SuggestionReason
    evidence: str


class WhichBundle(Enum):
    RETRIEVED = "Retrieved"
    FILTERED = "Filtered"


@dataclass(frozen=True)
class RelationDistribution:
    counts: dict[str, int]
    total: int
    percentages: dict[str, float]


def _suggest_for(relation: Relation, concept_set: ConceptSet) -> RemovalSuggestion | None:
    head = relation.head.surface
    tail = relation.tail
    tail_stem = stem(tail)
    for other in concept_set.surfaces():
        if other == head:
            continue
        if tail == other:
            return RemovalSuggestion(relation.id, SuggestionReason.CROSS_CONCEPT_TAIL, other)
    for other in concept_set.surfaces():
        if other == head:
            continue
        if tail_stem == stem(other):
            return RemovalSuggestion(relation.id, SuggestionReason.CROSS_CONCEPT_STEM, stem(other))
    if tail != head and tail_stem == stem(head):
        return RemovalSuggestion(relation.id, SuggestionReason.SELF_PARAPHRASE, stem(head))
    return None


def suggest_removals(concept_set: ConceptSet, bundle: KnowledgeBundle) -> list[RemovalSuggestion]:
    """Flag relations whose tail lexically links to another set concept.

    Each relation yields at most one suggestion, carrying the strongest
    applicable reason. Cross-concept reasons rank above self-paraphrase.
    """
    suggestions: list[RemovalSuggestion] = []
    for relation in bundle.relations():
        suggestion = _suggest_for(relation, concept_set)
        if suggestion is not None:
            suggestions.append(suggestion)
    suggestions.sort(key=lambda s: _REASON_ORDER[s.reason])
    return suggestions


def renumber_bundle(bundle: KnowledgeBundle) -> KnowledgeBundle:
    """Compact ranks to 0..k-1 per concept, preserving order and ids."""
    per_concept = {
        concept: tuple(replace(rel, rank=i) for i, rel in enumerate(rels))
        for concept, rels in bundle.per_concept.items()
    }
    return KnowledgeBundle(per_concept)


def apply_filter(
    bundle: KnowledgeBundle,
    decisions: list[FilterDecision],
    renumber: bool = False,
    require_known: bool = False,
) -> KnowledgeBundle:
    """Drop relations with a final Remove verdict.

    Kept relations retain their original rank numbers (gaps stay visible)
    unless ``renumber`` is set, which generation paths use for clean prompt
    numbering. Re-applying the same decisions to an already-filtered bundle
    is a no-op, so the operation is a projection; ``require_known`` turns a
    decision that references no relation in the bundle into an error instead,
    which submission paths use to reject bad input.
    """
    final = resolve_decisions(decisions)
    if require_known:
        known = bundle.relation_ids()
        unknown = [rid for rid in final if rid not in known]
        if unknown:
            raise UnknownRelationError(f"decisions reference unknown relation ids: {sorted(unknown)}")
    removed = {rid for rid, d in final.items() if d.verdict == Verdict.REMOVE}
    per_concept = {
        concept: tuple(r for r in rels if r.id not in removed)
        for concept, rels in bundle.per_concept.items()
    }
    result = KnowledgeBundle(per_concept)
    return renumber_bundle(result) if renumber else result


def one_decimal_shares(counts: dict[str, int], total: int) -> dict[str, float]:
    """Percentages at one-decimal precision that sum to exactly 100.0.

    Uses largest-remainder allocation over tenths of a percent, so each share
    sits within 0.1 of its exact value and the total never drifts.
    """
    if total <= 0:
        return {key: 0.0 for key in counts}
    tenths_exact = {key: count * 1000.0 / total for key, count in counts.items()}
    floors = {key: int(value) for key, value in tenths_exact.items()}
    leftover = 1000 - sum(floors.values())
    order = sorted(
        counts,
        key=lambda key: (-(tenths_exact[key] - floors[key]), -counts[key], key),
    )
    for key in order[:leftover]:
        floors[key] += 1
    return {key: floors[key] / 10.0 for key in counts}


def relation_distribution(
    records: list[KitgiRecord], which: WhichBundle = WhichBundle.RETRIEVED
) -> RelationDistribution:
    """Relation-type counts and percentage shares over the chosen bundles."""
    if not records:
        raise EmptyCorpusError("no records to aggregate")
    counts: dict[str, int] = {}
    for record in records:
        bundle = (
            record.retrieved_knowledge
            if which == WhichBundle.RETRIEVED
            else record.filtered_knowledge
        )
        for relation in bundle.relations():
            label = relation.rel_type.label
            counts[label] = counts.get(label, 0) + 1
    ordered = dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    total = sum(ordered.values())
    return RelationDistribution(
        counts=ordered,
        total=total,
        percentages=one_decimal_shares(ordered, total),
    )
