#!/usr/bin/env python3
"""Deterministically build the test fixtures under tests/data/.

Produces:
  published_corpus.jsonl  121-record corpus whose aggregate statistics match
                          the published benchmark exactly (relation totals,
                          per-type distributions, and both annotation
                          matrices). Five records are the fully worked
                          examples; the rest are synthesized around them to
                          hit the aggregate targets.
  commongen_sample.txt    10-line concept-list import fixture.
  kg_fixture/             offline knowledge-graph fixtures (cache shape).

Re-running the script reproduces byte-identical files.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

from kitgi.ablation import apply_filter
from kitgi.dataset import relation_to_json, save_dataset
from kitgi.model import (
    Annotation,
    Concept,
    ConceptSet,
    DecisionSource,
    EPOCH,
    FailureVariant,
    FilterDecision,
    GeneratedSentence,
    GenerationCondition,
    KitgiRecord,
    KnowledgeBundle,
    Relation,
    RelationType,
    Verdict,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"
SEED = 20240731
ANNOTATOR = "a1"

# Corpus-wide targets: total relations retrieved/kept per relation type.
RETRIEVED_TARGET = {
    "RelatedTo": 661,
    "AtLocation": 213,
    "IsA": 137,
    "Synonym": 131,
    "UsedFor": 95,
    "CapableOf": 85,
    "Antonym": 75,
    "PartOf": 70,
    "HasA": 60,
    "Causes": 50,
    "HasContext": 30,
    "FormOf": 28,
}
FILTERED_TARGET = {
    "RelatedTo": 308,
    "AtLocation": 158,
    "Synonym": 109,
    "IsA": 96,
    "UsedFor": 55,
    "CapableOf": 50,
    "Antonym": 45,
    "PartOf": 40,
    "HasA": 35,
    "Causes": 30,
    "HasContext": 28,
    "FormOf": 22,
}

# Annotation matrix targets (cell -> record count), full corpus of 121.
FULL_MATRIX = {"11": 111, "10": 10, "01": 0, "00": 0}
FILTERED_MATRIX = {"11": 8, "10": 34, "01": 25, "00": 54}

VOCAB = """
apple arrow bag ball band bank barn basket beach bell belt bench bike bird
blade block boot bottle bowl box branch bread brick broom brush bucket bus
button cabin cable cake camera camp candle cap car card carpet cart cave
chain chair chalk cheese chest chicken child church circle city clay cliff
cloud coal coast coat coin corn couch crow crowd cup curtain desk dish door
dress drum duck dust eagle edge egg engine face fan farm feather finger fire
fish flag flame floor flour flower fog foot forest fork fox frame frog fruit
garden gate gift glove goat gold goose grain grass hammer hand harbor hat hawk
hay heart hill hole honey hook horn horse hotel house hut ice iron island jar
jacket judge kettle key king kite kitten ladder lake lamp land lawn leaf
lemon letter light lion lock log map marble market mask meadow meat metal
milk mill mirror monkey moon moss motor mouse mud nail needle nest net node
oak oar ocean office onion orange oven owl paint palace pan paper path
pearl pen pencil piano pig pillow pine pipe plane plank plate plow pond pony
porch pot potato purse queen rabbit raft rail rain rake ranch ribbon rice
ring road rock roof rope rose rug sand scarf school screw seat seed shed
sheep shelf shell ship shirt shoe shop shore shovel silk silver sister
skirt sky sled sleeve smoke soap sock song spade spark spoon spring square
stable stairs stamp star station steam steel stem stone stool store storm
stove straw stream street string sugar suit sun table tail tent thread
thumb ticket tiger tin toast tomato tooth top towel tower town toy train
tray tree trunk tube tulip turkey turtle valley vase village vine violin
wagon wall wave wax well whale wheat wheel whip wind wine wing wolf wood
wool worm yard yarn zebra zone
""".split()


def sentence(text: str, condition: GenerationCondition) -> GeneratedSentence:
    return GeneratedSentence(
        text=text,
        condition=condition,
        backend_id="fixture",
        decode_params={},
        created_at=EPOCH,
    )


def annotation(cs_bit: int, cov_bit: int, variant: FailureVariant | None = None) -> Annotation:
    return Annotation(
        commonsense=cs_bit,
        coverage=cov_bit,
        annotator_id=ANNOTATOR,
        failure_variant=variant,
        created_at=EPOCH,
    )


def make_bundle(spec: list[tuple[str, list[tuple[str, str]]]], weights_start=3.5) -> KnowledgeBundle:
    """spec: [(head_surface, [(rel_type, tail), ...]), ...]"""
    per_concept: dict[Concept, tuple[Relation, ...]] = {}
    for head_surface, rels in spec:
        head = Concept(head_surface)
        relations = tuple(
            Relation.build(
                head=head,
                rel_type=RelationType(rel_type),
                tail=tail,
                weight=round(weights_start - 0.25 * rank, 2),
                rank=rank,
            )
            for rank, (rel_type, tail) in enumerate(rels)
        )
        per_concept[head] = relations
    return KnowledgeBundle(per_concept)


def decisions_for(bundle: KnowledgeBundle, removals: set[tuple[str, str, str]]) -> list[FilterDecision]:
    """Explicit Keep/Remove for every relation; removals keyed (head, type, tail)."""
    out = []
    for rel in bundle.relations():
        verdict = (
            Verdict.REMOVE
            if (rel.head.surface, rel.rel_type.label, rel.tail) in removals
            else Verdict.KEEP
        )
        out.append(
            FilterDecision(
                relation_id=rel.id,
                verdict=verdict,
                source=DecisionSource.HUMAN,
                annotator_id=ANNOTATOR,
            )
        )
    return out


def seed_record(
    surfaces: list[str],
    bundle_spec: list[tuple[str, list[tuple[str, str]]]],
    removals: set[tuple[str, str, str]],
    text_full: str,
    text_filtered: str,
    text_none: str,
    ann_full: Annotation,
    ann_filtered: Annotation,
    ann_none: Annotation,
) -> KitgiRecord:
    cset = ConceptSet.build(surfaces)
    bundle = make_bundle(bundle_spec)
    decisions = decisions_for(bundle, removals)
    return KitgiRecord(
        concept_set=cset,
        retrieved_knowledge=bundle,
        filtered_knowledge=apply_filter(bundle, decisions),
        sentence_full=sentence(text_full, GenerationCondition.FULL_KNOWLEDGE),
        sentence_filtered=sentence(text_filtered, GenerationCondition.FILTERED_KNOWLEDGE),
        sentence_none=sentence(text_none, GenerationCondition.NO_KNOWLEDGE),
        decisions=decisions,
        annotations={
            GenerationCondition.FULL_KNOWLEDGE: ann_full,
            GenerationCondition.FILTERED_KNOWLEDGE: ann_filtered,
            GenerationCondition.NO_KNOWLEDGE: ann_none,
        },
    )


LOOK_WATCH_WINDOW = [
    ("look", [("RelatedTo", "see"), ("RelatedTo", "glance"), ("RelatedTo", "eyes"),
              ("RelatedTo", "seeing"), ("RelatedTo", "view")]),
    ("watch", [("RelatedTo", "time"), ("RelatedTo", "wrist"), ("RelatedTo", "clock"),
               ("RelatedTo", "look"), ("RelatedTo", "clook")]),
    ("window", [("RelatedTo", "glass"), ("RelatedTo", "opening"), ("RelatedTo", "looking"),
                ("RelatedTo", "house"), ("RelatedTo", "wall")]),
]
LWW_REMOVALS = {
    ("look", "RelatedTo", "see"),
    ("look", "RelatedTo", "seeing"),
    ("watch", "RelatedTo", "look"),
    ("window", "RelatedTo", "looking"),
}


def build_seed_records() -> list[KitgiRecord]:
    records = []
    records.append(
        seed_record(
            ["look", "watch", "window"],
            LOOK_WATCH_WINDOW,
            LWW_REMOVALS,
            "A man looks at his watch through the window.",
            "A man is looking at a window.",
            "A watch window look.",
            annotation(1, 1),
            annotation(1, 0, FailureVariant.MISLEADING_KNOWLEDGE),
            annotation(0, 0),
        )
    )
    records.append(
        seed_record(
            ["dog", "pull", "race"],
            [
                ("dog", [("RelatedTo", "bark"), ("IsA", "animal"), ("AtLocation", "kennel"),
                         ("HasA", "tail")]),
                ("pull", [("RelatedTo", "tug"), ("Antonym", "push"), ("RelatedTo", "drag")]),
                ("race", [("RelatedTo", "run"), ("IsA", "contest"), ("AtLocation", "track"),
                          ("RelatedTo", "speed")]),
            ],
            {
                ("dog", "IsA", "animal"),
                ("pull", "RelatedTo", "tug"),
                ("pull", "RelatedTo", "drag"),
                ("race", "RelatedTo", "run"),
            },
            "A dog is racing against another dog in a race.",
            "A dog runs in a race.",
            "Dog race pull dog.",
            annotation(1, 0),
            annotation(1, 0),
            annotation(0, 0),
        )
    )
    records.append(
        seed_record(
            ["boat", "sail", "day"],
            [
                ("boat", [("AtLocation", "lake"), ("UsedFor", "travel"), ("CapableOf", "float"),
                          ("RelatedTo", "water")]),
                ("sail", [("RelatedTo", "wind"), ("RelatedTo", "cloth"), ("PartOf", "boat")]),
                ("day", [("Antonym", "night"), ("RelatedTo", "time"), ("IsA", "time_period")]),
            ],
            {
                ("boat", "RelatedTo", "water"),
                ("sail", "PartOf", "boat"),
                ("day", "RelatedTo", "time"),
            },
            "A boat sails across the lake on a clear day.",
            "Boats sail on a sunny day.",
            "Sail day boat sail.",
            annotation(1, 1),
            annotation(1, 1),
            annotation(0, 1),
        )
    )
    records.append(
        seed_record(
            ["fall", "ground", "jump"],
            [
                ("fall", [("RelatedTo", "autumn"), ("IsA", "season"), ("RelatedTo", "leaves")]),
                ("ground", [("RelatedTo", "earth"), ("AtLocation", "outside"),
                            ("RelatedTo", "soil")]),
                ("jump", [("RelatedTo", "leap"), ("RelatedTo", "hop"), ("Antonym", "fall")]),
            ],
            {
                ("jump", "Antonym", "fall"),
                ("ground", "RelatedTo", "earth"),
            },
            "A man jumps and falls to the ground.",
            "A man is jumping on the ground.",
            "The fall jump ground.",
            annotation(1, 1),
            annotation(1, 0, FailureVariant.MISLEADING_KNOWLEDGE),
            annotation(0, 0),
        )
    )
    records.append(
        seed_record(
            ["attempt", "fence", "knife", "stick", "throw"],
            [
                ("attempt", [("RelatedTo", "try"), ("RelatedTo", "effort")]),
                ("fence", [("IsA", "barrier"), ("UsedFor", "protection"), ("AtLocation", "yard")]),
                ("knife", [("UsedFor", "cutting"), ("IsA", "tool"), ("AtLocation", "kitchen")]),
                ("stick", [("IsA", "piece_of_wood"), ("RelatedTo", "branch")]),
                ("throw", [("RelatedTo", "launch"), ("RelatedTo", "toss")]),
            ],
            {
                ("knife", "UsedFor", "cutting"),
                ("fence", "UsedFor", "protection"),
                ("throw", "RelatedTo", "toss"),
            },
            "A man attempts to throw a knife and a stick over the fence.",
            "Someone throws a knife and attempts to throw it into the fence.",
            "Knife throw fence attempt stick.",
            annotation(1, 1),
            annotation(0, 0, FailureVariant.UNHELPFUL_KNOWLEDGE),
            annotation(0, 1),
        )
    )
    return records


def type_counts(records: list[KitgiRecord], filtered: bool) -> dict[str, int]:
    counts: dict[str, int] = {}
    for record in records:
        bundle = record.filtered_knowledge if filtered else record.retrieved_knowledge
        for rel in bundle.relations():
            counts[rel.rel_type.label] = counts.get(rel.rel_type.label, 0) + 1
    return counts


def build_synthetic_records(rng: random.Random, seeds: list[KitgiRecord]) -> list[KitgiRecord]:
    n_records = 121 - len(seeds)
    seed_retrieved = type_counts(seeds, filtered=False)
    seed_filtered = type_counts(seeds, filtered=True)

    # Remaining per-type budgets once the worked examples are accounted for.
    slots: list[tuple[str, bool]] = []
    for label in RETRIEVED_TARGET:
        retrieved = RETRIEVED_TARGET[label] - seed_retrieved.get(label, 0)
        kept = FILTERED_TARGET[label] - seed_filtered.get(label, 0)
        removed = retrieved - kept
        assert retrieved >= 0 and kept >= 0 and removed >= 0, (label, retrieved, kept)
        slots.extend([(label, True)] * removed)
        slots.extend([(label, False)] * kept)
    rng.shuffle(slots)

    sizes = [3] * 40 + [4] * 38 + [5] * 38
    assert len(sizes) == n_records
    n_concepts = sum(sizes)
    base, extra = divmod(len(slots), n_concepts)
    assert base + 1 <= 5, "per-concept relation budget exceeded"
    rel_counts = [base + 1] * extra + [base] * (n_concepts - extra)
    rng.shuffle(rel_counts)

    used_ids = {r.id for r in seeds}
    records: list[KitgiRecord] = []
    slot_idx = 0
    count_idx = 0
    full_cells = ["11"] * FULL_MATRIX["11"] + ["10"] * FULL_MATRIX["10"]
    filtered_cells = (
        ["11"] * FILTERED_MATRIX["11"]
        + ["10"] * FILTERED_MATRIX["10"]
        + ["01"] * FILTERED_MATRIX["01"]
        + ["00"] * FILTERED_MATRIX["00"]
    )
    for record in seeds:
        full_cells.remove(_cell(record, GenerationCondition.FULL_KNOWLEDGE))
        filtered_cells.remove(_cell(record, GenerationCondition.FILTERED_KNOWLEDGE))
    rng.shuffle(full_cells)
    rng.shuffle(filtered_cells)
    variant_cycle = [
        FailureVariant.MISLEADING_KNOWLEDGE,
        FailureVariant.UNHELPFUL_KNOWLEDGE,
        FailureVariant.SLIGHT_CONNECTION,
        None,
    ]

    for rec_idx, size in enumerate(sizes):
        while True:
            surfaces = rng.sample(VOCAB, size)
            cset = ConceptSet.build(surfaces)
            if cset.id not in used_ids:
                used_ids.add(cset.id)
                break
        per_concept: dict[Concept, tuple[Relation, ...]] = {}
        removals: set[tuple[str, str, str]] = set()
        for surface in surfaces:
            head = Concept(surface)
            k = rel_counts[count_idx]
            count_idx += 1
            taken = slots[slot_idx : slot_idx + k]
            slot_idx += k
            weights = sorted((round(rng.uniform(0.6, 5.0), 2) for _ in range(k)), reverse=True)
            used_pairs: set[tuple[str, str]] = set()
            relations = []
            for rank, (label, remove) in enumerate(taken):
                while True:
                    tail = rng.choice(VOCAB)
                    if tail != surface and (label, tail) not in used_pairs:
                        used_pairs.add((label, tail))
                        break
                relations.append(
                    Relation.build(
                        head=head,
                        rel_type=RelationType(label),
                        tail=tail,
                        weight=weights[rank],
                        rank=rank,
                    )
                )
                if remove:
                    removals.add((surface, label, tail))
            per_concept[head] = tuple(relations)

        bundle = KnowledgeBundle(per_concept)
        decisions = decisions_for(bundle, removals)
        full_cell = full_cells[rec_idx]
        filt_cell = filtered_cells[rec_idx]
        none_cov = rec_idx % 2

        variant = None
        if filt_cell != "11":
            variant = variant_cycle[rec_idx % len(variant_cycle)]

        records.append(
            KitgiRecord(
                concept_set=cset,
                retrieved_knowledge=bundle,
                filtered_knowledge=apply_filter(bundle, decisions),
                sentence_full=sentence(
                    _sentence_text(surfaces, full_cell[1] == "1"),
                    GenerationCondition.FULL_KNOWLEDGE,
                ),
                sentence_filtered=sentence(
                    _sentence_text(surfaces, filt_cell[1] == "1"),
                    GenerationCondition.FILTERED_KNOWLEDGE,
                ),
                sentence_none=sentence(
                    _sentence_text(surfaces, none_cov == 1),
                    GenerationCondition.NO_KNOWLEDGE,
                ),
                decisions=decisions,
                annotations={
                    GenerationCondition.FULL_KNOWLEDGE: annotation(
                        int(full_cell[0]), int(full_cell[1])
                    ),
                    GenerationCondition.FILTERED_KNOWLEDGE: annotation(
                        int(filt_cell[0]), int(filt_cell[1]), variant
                    ),
                    GenerationCondition.NO_KNOWLEDGE: annotation(0, none_cov),
                },
            )
        )
    assert slot_idx == len(slots)
    return records


def _cell(record: KitgiRecord, condition: GenerationCondition) -> str:
    ann = record.annotations[condition]
    return f"{ann.commonsense}{ann.coverage}"


def _sentence_text(surfaces: list[str], covered: bool) -> str:
    words = surfaces if covered else surfaces[:-1]
    return "a " + " ".join(words) + "."


COMMONGEN_LINES = [
    "dog pull race",
    "boat sail day",
    "look watch window",
    "fall ground jump",
    "attempt#fence#knife#stick#throw",
    "mountain ski snow\tA skier glides down the snowy mountain.",
    "field cow graze",
    "book read lamp",
    "river bridge cross walk",
    "music dance party night",
]

# graze is intentionally absent so the empty-relations path gets exercised.
KG_FIXTURE_EXTRA = {
    "dog": [("RelatedTo", "bark"), ("IsA", "animal"), ("AtLocation", "kennel"), ("HasA", "tail")],
    "pull": [("RelatedTo", "tug"), ("Antonym", "push"), ("RelatedTo", "drag")],
    "race": [("RelatedTo", "run"), ("IsA", "contest"), ("AtLocation", "track"), ("RelatedTo", "speed")],
    "boat": [("AtLocation", "lake"), ("UsedFor", "travel"), ("CapableOf", "float"), ("RelatedTo", "water")],
    "sail": [("RelatedTo", "wind"), ("RelatedTo", "cloth"), ("PartOf", "boat")],
    "day": [("Antonym", "night"), ("RelatedTo", "time"), ("IsA", "time_period")],
    "fall": [("RelatedTo", "autumn"), ("IsA", "season"), ("RelatedTo", "leaves")],
    "ground": [("RelatedTo", "earth"), ("AtLocation", "outside"), ("RelatedTo", "soil")],
    "jump": [("RelatedTo", "leap"), ("RelatedTo", "hop"), ("Antonym", "fall")],
    "attempt": [("RelatedTo", "try"), ("RelatedTo", "effort")],
    "fence": [("IsA", "barrier"), ("UsedFor", "protection"), ("AtLocation", "yard")],
    "knife": [("UsedFor", "cutting"), ("IsA", "tool"), ("AtLocation", "kitchen")],
    "stick": [("IsA", "piece_of_wood"), ("RelatedTo", "branch")],
    "throw": [("RelatedTo", "launch"), ("RelatedTo", "toss")],
    "mountain": [("RelatedTo", "peak"), ("IsA", "landform"), ("AtLocation", "range"), ("HasA", "summit")],
    "ski": [("UsedFor", "sliding"), ("AtLocation", "slope"), ("RelatedTo", "winter")],
    "snow": [("RelatedTo", "cold"), ("IsA", "precipitation"), ("AtLocation", "winter_sky")],
    "field": [("RelatedTo", "grass"), ("AtLocation", "farm"), ("UsedFor", "crops")],
    "cow": [("IsA", "animal"), ("AtLocation", "barn"), ("CapableOf", "moo"), ("HasA", "horns")],
    "book": [("UsedFor", "reading"), ("AtLocation", "shelf"), ("HasA", "pages"), ("RelatedTo", "story")],
    "read": [("RelatedTo", "study"), ("Causes", "learning"), ("RelatedTo", "words")],
    "lamp": [("UsedFor", "light"), ("AtLocation", "desk"), ("IsA", "fixture")],
    "river": [("RelatedTo", "stream"), ("AtLocation", "valley"), ("CapableOf", "flow"), ("HasA", "banks")],
    "bridge": [("UsedFor", "crossing"), ("AtLocation", "river"), ("IsA", "structure")],
    "cross": [("RelatedTo", "traverse"), ("Synonym", "traverse"), ("Antonym", "stay")],
    "walk": [("RelatedTo", "stroll"), ("IsA", "movement"), ("UsedFor", "exercise")],
    "music": [("RelatedTo", "sound"), ("UsedFor", "dancing"), ("HasA", "rhythm"), ("AtLocation", "concert")],
    "dance": [("RelatedTo", "movement"), ("UsedFor", "fun"), ("AtLocation", "ballroom")],
    "party": [("RelatedTo", "celebration"), ("AtLocation", "house"), ("HasA", "guests")],
    "night": [("Antonym", "day"), ("RelatedTo", "dark"), ("AtLocation", "sky")],
}


def write_kg_fixture(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    entries: dict[str, list[tuple[str, str]]] = dict(KG_FIXTURE_EXTRA)
    for head_surface, rels in LOOK_WATCH_WINDOW:
        entries[head_surface] = rels
    for surface in sorted(entries):
        head = Concept(surface)
        relations = [
            Relation.build(
                head=head,
                rel_type=RelationType(label),
                tail=tail,
                weight=round(3.5 - 0.25 * rank, 2),
                rank=rank,
            )
            for rank, (label, tail) in enumerate(entries[surface])
        ]
        payload = {
            "concept": {"surface": surface, "lang": "en"},
            "limit": 5,
            "endpoint": "fixture://kg",
            "fetched_at": "1970-01-01T00:00:00Z",
            "relations": [relation_to_json(r) for r in relations],
        }
        path = out_dir / f"{surface}__en__5.json"
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")


def build_service_corpus() -> list[KitgiRecord]:
    """One fresh record for interactive-service tests: knowledge fetched and
    the filtered-condition sentence generated, but nothing decided or labeled
    yet, so both task stages are open."""
    cset = ConceptSet.build(["look", "watch", "window"])
    bundle = make_bundle(LOOK_WATCH_WINDOW)
    return [
        KitgiRecord(
            concept_set=cset,
            retrieved_knowledge=bundle,
            filtered_knowledge=bundle,
            sentence_filtered=sentence(
                "A man is looking at a window.", GenerationCondition.FILTERED_KNOWLEDGE
            ),
        )
    ]


def main() -> int:
    rng = random.Random(SEED)
    seeds = build_seed_records()
    records = seeds + build_synthetic_records(rng, seeds)
    assert len(records) == 121

    retrieved = type_counts(records, filtered=False)
    filtered = type_counts(records, filtered=True)
    assert retrieved == RETRIEVED_TARGET, retrieved
    assert filtered == FILTERED_TARGET, filtered
    assert sum(retrieved.values()) == 1635
    assert sum(filtered.values()) == 976

    for condition, target in (
        (GenerationCondition.FULL_KNOWLEDGE, FULL_MATRIX),
        (GenerationCondition.FILTERED_KNOWLEDGE, FILTERED_MATRIX),
    ):
        got = {"11": 0, "10": 0, "01": 0, "00": 0}
        for record in records:
            got[_cell(record, condition)] += 1
        assert got == target, (condition, got)

    DATA_DIR.mkdir(parents=True, exist_ok=True)
    count = save_dataset(records, DATA_DIR / "published_corpus.jsonl")
    save_dataset(build_service_corpus(), DATA_DIR / "service_corpus.jsonl")
    (DATA_DIR / "commongen_sample.txt").write_text(
        "".join(line + "\n" for line in COMMONGEN_LINES), encoding="utf-8"
    )
    write_kg_fixture(DATA_DIR / "kg_fixture")
    print(f"wrote {count} corpus records and fixtures under {DATA_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
