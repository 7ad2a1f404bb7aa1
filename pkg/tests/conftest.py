from pathlib import Path

import pytest

from kitgi.ablation import apply_filter
from kitgi.dataset import load_dataset
from kitgi.model import (
    Concept,
    ConceptSet,
    DecisionSource,
    FilterDecision,
    KnowledgeBundle,
    Relation,
    RelationType,
    Verdict,
)

DATA_DIR = Path(__file__).parent / "data"

LWW_RELATIONS = [
    ("look", [("RelatedTo", "see"), ("RelatedTo", "glance"), ("RelatedTo", "eyes"),
              ("RelatedTo", "seeing"), ("RelatedTo", "view")]),
    ("watch", [("RelatedTo", "time"), ("RelatedTo", "wrist"), ("RelatedTo", "clock"),
               ("RelatedTo", "look"), ("RelatedTo", "clook")]),
    ("window", [("RelatedTo", "glass"), ("RelatedTo", "opening"), ("RelatedTo", "looking"),
                ("RelatedTo", "house"), ("RelatedTo", "wall")]),
]

LWW_REMOVED_TAILS = {("look", "see"), ("look", "seeing"), ("watch", "look"), ("window", "looking")}


def build_bundle(spec, start_weight=3.5):
    per_concept = {}
    for surface, rels in spec:
        head = Concept(surface)
        per_concept[head] = tuple(
            Relation.build(
                head=head,
                rel_type=RelationType(rel_type),
                tail=tail,
                weight=round(start_weight - 0.25 * rank, 2),
                rank=rank,
            )
            for rank, (rel_type, tail) in enumerate(rels)
        )
    return KnowledgeBundle(per_concept)


@pytest.fixture
def lww_set():
    return ConceptSet.build(["look", "watch", "window"])


@pytest.fixture
def lww_bundle():
    return build_bundle(LWW_RELATIONS)


@pytest.fixture
def lww_decisions(lww_bundle):
    decisions = []
    for rel in lww_bundle.relations():
        verdict = (
            Verdict.REMOVE
            if (rel.head.surface, rel.tail) in LWW_REMOVED_TAILS
            else Verdict.KEEP
        )
        decisions.append(
            FilterDecision(
                relation_id=rel.id,
                verdict=verdict,
                source=DecisionSource.HUMAN,
                annotator_id="a1",
            )
        )
    return decisions


@pytest.fixture
def lww_filtered(lww_bundle, lww_decisions):
    return apply_filter(lww_bundle, lww_decisions)


@pytest.fixture(scope="session")
def published_corpus():
    return load_dataset(DATA_DIR / "published_corpus.jsonl")
