"""Line-delimited dataset persistence and CommonGen ingestion.

Each dataset file holds one JSON record per line with exactly these fields:
``concept_set``, ``retrieved_knowledge``, ``filtered_knowledge``,
``sentence_full``, ``sentence_filtered``, ``sentence_none``, ``decisions``,
``annotations``. Saving then loading returns the records field-for-field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    Annotation,
    Concept,
    ConceptSet,
    DecisionSource,
    FailureVariant,
    FilterDecision,
    GeneratedSentence,
    GenerationCondition,
    KitgiRecord,
    KnowledgeBundle,
    Relation,
    RelationType,
    Verdict,
    Violation,
    concept_set_id,
    format_timestamp,
    parse_timestamp,
    validate_record,
)

RECORD_FIELDS = (
    "concept_set",
    "retrieved_knowledge",
    "filtered_knowledge",
    "sentence_full",
    "sentence_filtered",
    "sentence_none",
    "decisions",
    "annotations",
)


class DatasetError(Exception):
    pass


def concept_to_json(c: Concept) -> dict:
    return {"surface": c.surface, "lang": c.lang}


def concept_from_json(obj: dict) -> Concept:
    return Concept(surface=obj["surface"], lang=obj.get("lang", "en"))


def concept_set_to_json(cs: ConceptSet) -> dict:
    return {"id": cs.id, "concepts": [concept_to_json(c) for c in cs.concepts]}


def concept_set_from_json(obj: dict) -> ConceptSet:
    return ConceptSet(id=obj["id"], concepts=tuple(concept_from_json(c) for c in obj["concepts"]))


def relation_to_json(r: Relation) -> dict:
    return {
        "id": r.id,
        "head": concept_to_json(r.head),
        "rel_type": r.rel_type.label,
        "tail": r.tail,
        "weight": r.weight,
        "rank": r.rank,
    }


def relation_from_json(obj: dict) -> Relation:
    return Relation(
        id=obj["id"],
        head=concept_from_json(obj["head"]),
        rel_type=RelationType(obj["rel_type"]),
        tail=obj["tail"],
        weight=float(obj["weight"]),
        rank=int(obj["rank"]),
    )


def bundle_to_json(bundle: KnowledgeBundle) -> dict:
    return {
        concept.surface: [relation_to_json(r) for r in rels]
        for concept, rels in bundle.per_concept.items()
    }


def bundle_from_json(obj: dict, cset: ConceptSet | None = None) -> KnowledgeBundle:
    by_surface = {c.surface: c for c in cset.concepts} if cset else {}
    per_concept: dict[Concept, tuple[Relation, ...]] = {}
    for surface, rel_objs in obj.items():
        rels = tuple(relation_from_json(r) for r in rel_objs)
        if rels:
            concept = rels[0].head
        else:
            concept = by_surface.get(surface, Concept(surface))
        per_concept[concept] = rels
    return KnowledgeBundle(per_concept)


def sentence_to_json(s: GeneratedSentence) -> dict:
    return {
        "text": s.text,
        "condition": s.condition.value,
        "backend_id": s.backend_id,
        "decode_params": dict(s.decode_params),
        "created_at": format_timestamp(s.created_at),
    }


def sentence_from_json(obj: dict) -> GeneratedSentence:
    return GeneratedSentence(
        text=obj["text"],
        condition=GenerationCondition(obj["condition"]),
        backend_id=obj["backend_id"],
        decode_params=dict(obj.get("decode_params", {})),
        created_at=parse_timestamp(obj["created_at"]),
    )


def annotation_to_json(a: Annotation) -> dict:
    return {
        "commonsense": a.commonsense,
        "coverage": a.coverage,
        "annotator_id": a.annotator_id,
        "failure_variant": a.failure_variant.value if a.failure_variant else None,
        "note": a.note,
        "coverage_auto": a.coverage_auto,
        "created_at": format_timestamp(a.created_at),
    }


def annotation_from_json(obj: dict) -> Annotation:
    variant = obj.get("failure_variant")
    return Annotation(
        commonsense=int(obj["commonsense"]),
        coverage=int(obj["coverage"]),
        annotator_id=obj["annotator_id"],
        failure_variant=FailureVariant(variant) if variant else None,
        note=obj.get("note"),
        coverage_auto=obj.get("coverage_auto"),
        created_at=parse_timestamp(obj["created_at"]),
    )


def decision_to_json(d: FilterDecision) -> dict:
    return {
        "relation_id": d.relation_id,
        "verdict": d.verdict.value,
        "source": d.source.value,
        "annotator_id": d.annotator_id,
        "rationale": d.rationale,
    }


def decision_from_json(obj: dict) -> FilterDecision:
    return FilterDecision(
        relation_id=obj["relation_id"],
        verdict=Verdict(obj["verdict"]),
        source=DecisionSource(obj["source"]),
        annotator_id=obj["annotator_id"],
        rationale=obj.get("rationale"),
    )


def record_to_json(record: KitgiRecord) -> dict:
    return {
        "concept_set": concept_set_to_json(record.concept_set),
        "retrieved_knowledge": bundle_to_json(record.retrieved_knowledge),
        "filtered_knowledge": bundle_to_json(record.filtered_knowledge),
        "sentence_full": sentence_to_json(record.sentence_full) if record.sentence_full else None,
        "sentence_filtered": sentence_to_json(record.sentence_filtered)
        if record.sentence_filtered
        else None,
        "sentence_none": sentence_to_json(record.sentence_none) if record.sentence_none else None,
        "decisions": [decision_to_json(d) for d in record.decisions],
        "annotations": {
            condition.value: annotation_to_json(ann)
            for condition, ann in record.annotations.items()
        },
    }


def record_from_json(obj: dict) -> KitgiRecord:
    cset = concept_set_from_json(obj["concept_set"])
    return KitgiRecord(
        concept_set=cset,
        retrieved_knowledge=bundle_from_json(obj["retrieved_knowledge"], cset),
        filtered_knowledge=bundle_from_json(obj["filtered_knowledge"], cset),
        sentence_full=sentence_from_json(obj["sentence_full"]) if obj.get("sentence_full") else None,
        sentence_filtered=sentence_from_json(obj["sentence_filtered"])
        if obj.get("sentence_filtered")
        else None,
        sentence_none=sentence_from_json(obj["sentence_none"]) if obj.get("sentence_none") else None,
        decisions=[decision_from_json(d) for d in obj.get("decisions", [])],
        annotations={
            GenerationCondition(cond): annotation_from_json(ann)
            for cond, ann in obj.get("annotations", {}).items()
        },
    )


def record_to_line(record: KitgiRecord) -> str:
    return json.dumps(record_to_json(record), ensure_ascii=False, separators=(",", ":"))


def record_from_line(line: str) -> KitgiRecord:
    return record_from_json(json.loads(line))


def new_record(concept_set: ConceptSet) -> KitgiRecord:
    return KitgiRecord(concept_set=concept_set)


def save_dataset(records: list[KitgiRecord], path: str | Path) -> int:
    """Write records one per line; refuses to persist invalid records."""
    problems: list[str] = []
    for record in records:
        violations = validate_record(record)
        if violations:
            listed = "; ".join(str(v) for v in violations)
            problems.append(f"record {record.id}: {listed}")
    if problems:
        raise DatasetError("cannot save invalid records: " + " | ".join(problems))
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_line(record))
            fh.write("\n")
    tmp.replace(path)
    return len(records)


def load_dataset(path: str | Path) -> list[KitgiRecord]:
    records: list[KitgiRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(record_from_line(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"line {lineno}: parse failure: {exc}") from exc
    return records


@dataclass
class SkippedEntry:
    line_no: int
    entry: str
    reason: str


@dataclass
class ImportResult:
    concept_sets: list[ConceptSet] = field(default_factory=list)
    skipped: list[SkippedEntry] = field(default_factory=list)


def import_commongen(path: str | Path) -> ImportResult:
    """Read CommonGen-style concept lists, one entry per line.

    Accepts both bare concept lists and lines with a reference sentence after
    a tab (the reference is ignored). Concepts may be separated by whitespace
    or by ``#``. Entries outside the 3 to 5 concept range are skipped with a
    reason instead of failing the whole import.
    """
    result = ImportResult()
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            concept_field = line.split("\t", 1)[0].strip()
            if "#" in concept_field:
                parts = [p for p in concept_field.split("#") if p.strip()]
            else:
                parts = concept_field.split()
            surfaces = [p.strip().lower() for p in parts]
            if not (3 <= len(surfaces) <= 5):
                result.skipped.append(SkippedEntry(lineno, concept_field, "SizeOutOfRange"))
                continue
            if len(set(surfaces)) != len(surfaces):
                result.skipped.append(SkippedEntry(lineno, concept_field, "DuplicateConcepts"))
                continue
            set_id = concept_set_id(surfaces)
            if set_id in seen_ids:
                result.skipped.append(SkippedEntry(lineno, concept_field, "DuplicateConceptSet"))
                continue
            seen_ids.add(set_id)
            result.concept_sets.append(ConceptSet.build(surfaces))
    return result
