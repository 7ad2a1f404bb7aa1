"""Domain types for the knowledge-ablation workbench.

Everything here is a plain value object: immutable after construction and
safe to share across threads. Persistence and wire codecs live in
``kitgi.dataset``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

MIN_CONCEPTS = 3
MAX_CONCEPTS = 5
MAX_RELATIONS_PER_CONCEPT = 5

# Fixed timestamp used by deterministic backends and fixtures so that
# repeated runs produce byte-identical artifacts.
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

KNOWN_RELATION_TYPES = (
    "RelatedTo",
    "AtLocation",
    "IsA",
    "Synonym",
    "UsedFor",
    "CapableOf",
    "PartOf",
    "HasA",
    "Antonym",
    "Causes",
)

_RELATION_LABEL_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_/]*$")
_SURFACE_RE = re.compile(r"^\S+$")


def utc_now() -> datetime:
    """Current UTC time truncated to whole seconds."""
    return datetime.now(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def concept_set_id(surfaces: list[str] | tuple[str, ...]) -> str:
    """Deterministic id from the sorted concept surfaces.

    Re-importing the same concept set always yields the same id, which makes
    imports idempotent.
    """
    digest = hashlib.sha1("|".join(sorted(surfaces)).encode("utf-8")).hexdigest()
    return f"cs-{digest[:12]}"


def relation_id(head_surface: str, rel_type: str, tail: str) -> str:
    digest = hashlib.sha1(f"{head_surface}|{rel_type}|{tail}".encode("utf-8")).hexdigest()
    return f"r-{digest[:12]}"


@dataclass(frozen=True)
class Concept:
    """A single lowercase lemma; multiword terms are underscore-joined."""

    surface: str
    lang: str = "en"

    def words(self) -> list[str]:
        return self.surface.split("_")

    def display(self) -> str:
        """Space-rendered form used in prompts."""
        return self.surface.replace("_", " ")


@dataclass(frozen=True)
class ConceptSet:
    id: str
    concepts: tuple[Concept, ...]

    @classmethod
    def build(cls, surfaces: list[str] | tuple[str, ...], lang: str = "en") -> "ConceptSet":
        return cls(
            id=concept_set_id(tuple(surfaces)),
            concepts=tuple(Concept(s, lang) for s in surfaces),
        )

    def surfaces(self) -> tuple[str, ...]:
        return tuple(c.surface for c in self.concepts)

    def __len__(self) -> int:
        return len(self.concepts)


@dataclass(frozen=True, order=True)
class RelationType:
    """A knowledge-graph edge label such as ``RelatedTo``.

    The common ConceptNet labels are listed in :data:`KNOWN_RELATION_TYPES`;
    any other well-formed label is carried through verbatim so unlisted edge
    types survive a round trip.
    """

    label: str

    def __str__(self) -> str:
        return self.label

    @property
    def is_known(self) -> bool:
        return self.label in KNOWN_RELATION_TYPES

    def render(self) -> str:
        return self.label

    @classmethod
    def parse(cls, text: str) -> "RelationType":
        if not _RELATION_LABEL_RE.match(text):
            raise ValueError(f"not a relation type label: {text!r}")
        return cls(text)


@dataclass(frozen=True)
class Relation:
    """One typed knowledge-graph edge attached to a head concept."""

    id: str
    head: Concept
    rel_type: RelationType
    tail: str
    weight: float
    rank: int

    @classmethod
    def build(
        cls,
        head: Concept,
        rel_type: RelationType | str,
        tail: str,
        weight: float,
        rank: int,
    ) -> "Relation":
        rtype = rel_type if isinstance(rel_type, RelationType) else RelationType.parse(rel_type)
        return cls(
            id=relation_id(head.surface, rtype.label, tail),
            head=head,
            rel_type=rtype,
            tail=tail,
            weight=weight,
            rank=rank,
        )


@dataclass
class KnowledgeBundle:
    """Per-concept relation lists, keyed in concept-set order."""

    per_concept: dict[Concept, tuple[Relation, ...]] = field(default_factory=dict)

    def concepts(self) -> list[Concept]:
        return list(self.per_concept.keys())

    def relations(self) -> list[Relation]:
        return [r for rels in self.per_concept.values() for r in rels]

    def relation_ids(self) -> set[str]:
        return {r.id for r in self.relations()}

    def by_id(self) -> dict[str, Relation]:
        return {r.id: r for r in self.relations()}

    def size(self) -> int:
        return sum(len(rels) for rels in self.per_concept.values())

    def get(self, concept: Concept) -> tuple[Relation, ...]:
        return self.per_concept.get(concept, ())

    def for_surface(self, surface: str) -> tuple[Relation, ...]:
        for concept, rels in self.per_concept.items():
            if concept.surface == surface:
                return rels
        return ()


class GenerationCondition(Enum):
    NO_KNOWLEDGE = "NoKnowledge"
    FULL_KNOWLEDGE = "FullKnowledge"
    FILTERED_KNOWLEDGE = "FilteredKnowledge"


class Verdict(Enum):
    KEEP = "Keep"
    REMOVE = "Remove"


class DecisionSource(Enum):
    SUGGESTED = "Suggested"
    HUMAN = "Human"


class FailureVariant(Enum):
    MISLEADING_KNOWLEDGE = "MisleadingKnowledge"
    UNHELPFUL_KNOWLEDGE = "UnhelpfulKnowledge"
    SLIGHT_CONNECTION = "SlightConnection"


@dataclass(frozen=True)
class GeneratedSentence:
    text: str
    condition: GenerationCondition
    backend_id: str
    decode_params: dict[str, str] = field(default_factory=dict)
    created_at: datetime = field(default_factory=utc_now)


@dataclass(frozen=True)
class Annotation:
    """One human judgment of a generated sentence.

    ``coverage`` is the effective bit (human override wins); when the
    automatic checker ran, its bit is retained in ``coverage_auto`` so
    disagreements stay measurable.
    """

    commonsense: int
    coverage: int
    annotator_id: str
    failure_variant: FailureVariant | None = None
    note: str | None = None
    coverage_auto: int | None = None
    created_at: datetime = field(default_factory=utc_now)


@dataclass(frozen=True)
class FilterDecision:
    relation_id: str
    verdict: Verdict
    source: DecisionSource
    annotator_id: str
    rationale: str | None = None


@dataclass
class KitgiRecord:
    """One dataset instance: concept set, knowledge, sentences, judgments."""

    concept_set: ConceptSet
    retrieved_knowledge: KnowledgeBundle = field(default_factory=KnowledgeBundle)
    filtered_knowledge: KnowledgeBundle = field(default_factory=KnowledgeBundle)
    sentence_full: GeneratedSentence | None = None
    sentence_filtered: GeneratedSentence | None = None
    sentence_none: GeneratedSentence | None = None
    decisions: list[FilterDecision] = field(default_factory=list)
    annotations: dict[GenerationCondition, Annotation] = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.concept_set.id

    def sentence_for(self, condition: GenerationCondition) -> GeneratedSentence | None:
        return {
            GenerationCondition.NO_KNOWLEDGE: self.sentence_none,
            GenerationCondition.FULL_KNOWLEDGE: self.sentence_full,
            GenerationCondition.FILTERED_KNOWLEDGE: self.sentence_filtered,
        }[condition]


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by :func:`validate_record`."""

    code: str
    message: str
    path: str = ""

    def __str__(self) -> str:
        where = f" at {self.path}" if self.path else ""
        return f"{self.code}{where}: {self.message}"


def resolve_decisions(decisions: list[FilterDecision]) -> dict[str, FilterDecision]:
    """Final decision per relation id: Human overrides Suggested, later wins."""
    final: dict[str, FilterDecision] = {}
    for d in decisions:
        current = final.get(d.relation_id)
        if current is None:
            final[d.relation_id] = d
        elif d.source == DecisionSource.HUMAN or current.source == DecisionSource.SUGGESTED:
            final[d.relation_id] = d
    return final


def _validate_concept(concept: Concept, path: str, out: list[Violation]) -> None:
    s = concept.surface
    if not s or s != s.strip() or s != s.lower() or not _SURFACE_RE.match(s):
        out.append(
            Violation(
                "ConceptSurfaceInvalid",
                f"surface must be a non-empty lowercase term without whitespace, got {s!r}",
                path,
            )
        )


def validate_concept_set(cset: ConceptSet, path: str = "concept_set") -> list[Violation]:
    out: list[Violation] = []
    n = len(cset.concepts)
    if not (MIN_CONCEPTS <= n <= MAX_CONCEPTS):
        out.append(
            Violation(
                "ConceptSetSizeOutOfRange",
                f"expected {MIN_CONCEPTS} to {MAX_CONCEPTS} concepts, got {n}",
                path,
            )
        )
    if len(set(cset.surfaces())) != n:
        out.append(Violation("DuplicateConcepts", "concepts must be pairwise distinct", path))
    for i, concept in enumerate(cset.concepts):
        _validate_concept(concept, f"{path}.concepts[{i}]", out)
    return out


def _validate_bundle(
    bundle: KnowledgeBundle,
    cset: ConceptSet,
    path: str,
    out: list[Violation],
) -> None:
    surfaces = set(cset.surfaces())
    for concept, rels in bundle.per_concept.items():
        cpath = f"{path}[{concept.surface}]"
        if concept.surface not in surfaces:
            out.append(
                Violation(
                    "BundleKeyNotInConceptSet",
                    f"concept {concept.surface!r} is not in the record's concept set",
                    cpath,
                )
            )
        if len(rels) > MAX_RELATIONS_PER_CONCEPT:
            out.append(
                Violation(
                    "PerConceptLimitExceeded",
                    f"{len(rels)} relations exceed the per-concept limit of {MAX_RELATIONS_PER_CONCEPT}",
                    cpath,
                )
            )
        for i, rel in enumerate(rels):
            rpath = f"{cpath}[{i}]"
            if not rel.tail:
                out.append(Violation("RelationTailEmpty", "tail term is empty", rpath))
            if rel.weight < 0:
                out.append(
                    Violation("RelationWeightNegative", f"weight {rel.weight} is negative", rpath)
                )
            if not (0 <= rel.rank <= MAX_RELATIONS_PER_CONCEPT - 1):
                out.append(
                    Violation(
                        "RelationRankOutOfRange",
                        f"rank {rel.rank} outside [0, {MAX_RELATIONS_PER_CONCEPT - 1}]",
                        rpath,
                    )
                )
        ranks = [r.rank for r in rels]
        if any(b <= a for a, b in zip(ranks, ranks[1:])):
            out.append(Violation("RanksNotIncreasing", f"ranks {ranks} are not strictly increasing", cpath))
        weights = [r.weight for r in rels]
        if any(b > a for a, b in zip(weights, weights[1:])):
            out.append(
                Violation("WeightsNotMonotonic", f"weights {weights} are not non-increasing", cpath)
            )


def _validate_sentence(
    sentence: GeneratedSentence,
    expected: GenerationCondition,
    path: str,
    out: list[Violation],
) -> None:
    if not sentence.text.strip():
        out.append(Violation("SentenceTextEmpty", "generated sentence text is empty", path))
    if sentence.condition != expected:
        out.append(
            Violation(
                "SentenceConditionMismatch",
                f"stored under {expected.value} but stamped {sentence.condition.value}",
                path,
            )
        )


def _validate_annotation(ann: Annotation, path: str, out: list[Violation]) -> None:
    for name in ("commonsense", "coverage"):
        bit = getattr(ann, name)
        if bit not in (0, 1):
            out.append(Violation("AnnotationBitInvalid", f"{name} bit {bit!r} not in {{0,1}}", path))
    if ann.coverage_auto is not None and ann.coverage_auto not in (0, 1):
        out.append(
            Violation("AnnotationBitInvalid", f"coverage_auto bit {ann.coverage_auto!r} not in {{0,1}}", path)
        )
    if ann.failure_variant is not None and ann.commonsense == 1 and ann.coverage == 1:
        out.append(
            Violation(
                "FailureVariantWithoutFailure",
                "failure variant set although both bits are 1",
                path,
            )
        )


def validate_record(record: KitgiRecord) -> list[Violation]:
    """Check every record invariant; an empty list means the record is valid."""
    out: list[Violation] = []
    out.extend(validate_concept_set(record.concept_set))

    _validate_bundle(record.retrieved_knowledge, record.concept_set, "retrieved_knowledge", out)
    _validate_bundle(record.filtered_knowledge, record.concept_set, "filtered_knowledge", out)

    retrieved_ids = record.retrieved_knowledge.relation_ids()
    filtered_ids = record.filtered_knowledge.relation_ids()
    foreign = filtered_ids - retrieved_ids
    if foreign:
        out.append(
            Violation(
                "FilteredNotSubset",
                f"filtered knowledge contains relation ids absent from retrieved: {sorted(foreign)}",
                "filtered_knowledge",
            )
        )
    else:
        # Conservation only means something once the subset law holds.
        final = resolve_decisions(record.decisions)
        removed = sum(1 for d in final.values() if d.verdict == Verdict.REMOVE)
        if removed + record.filtered_knowledge.size() != record.retrieved_knowledge.size():
            out.append(
                Violation(
                    "ConservationMismatch",
                    f"{removed} removals + {record.filtered_knowledge.size()} kept != "
                    f"{record.retrieved_knowledge.size()} retrieved",
                    "decisions",
                )
            )

    seen: set[tuple[str, DecisionSource]] = set()
    for i, d in enumerate(record.decisions):
        dpath = f"decisions[{i}]"
        if d.relation_id not in retrieved_ids:
            out.append(
                Violation(
                    "DecisionUnknownRelation",
                    f"decision references unknown relation id {d.relation_id!r}",
                    dpath,
                )
            )
        key = (d.relation_id, d.source)
        if key in seen:
            out.append(
                Violation(
                    "DuplicateDecision",
                    f"more than one {d.source.value} decision for relation {d.relation_id!r}",
                    dpath,
                )
            )
        seen.add(key)

    for condition, sentence in (
        (GenerationCondition.FULL_KNOWLEDGE, record.sentence_full),
        (GenerationCondition.FILTERED_KNOWLEDGE, record.sentence_filtered),
        (GenerationCondition.NO_KNOWLEDGE, record.sentence_none),
    ):
        if sentence is not None:
            _validate_sentence(sentence, condition, f"sentence[{condition.value}]", out)

    for condition, ann in record.annotations.items():
        apath = f"annotations[{condition.value}]"
        if record.sentence_for(condition) is None:
            out.append(
                Violation(
                    "AnnotationWithoutSentence",
                    f"annotation for {condition.value} but no such sentence",
                    apath,
                )
            )
        _validate_annotation(ann, apath, out)

    return out
