"""Acceptance suite: one test per release criterion, run at stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. The eight 1000-case property suites share a 60 second budget,
checked at the end of the module.
"""

from __future__ import annotations

import functools
import json
import tempfile
import threading
import time
from pathlib import Path
from unittest import mock

import pytest
from click.testing import CliRunner
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from kitgi.ablation import apply_filter, relation_distribution, WhichBundle
from kitgi.cli import main as cli_main
from kitgi.coverage import check_coverage, stem
from kitgi.dataset import load_dataset, save_dataset
from kitgi.evalstats import build_matrix, summarize
from kitgi.generation import generate_batch, stub_backend
from kitgi.generation import _stub_complete as real_stub_complete
from kitgi.model import ConceptSet, GenerationCondition, Verdict
from kitgi.prompting import build_prompt, parse_relations, render_knowledge
from kitgi.service import STAGE_FILTER, TaskStore

from .conftest import DATA_DIR
from .strategies import (
    bundled_sets,
    decision_lists,
    knowledge_records,
    light_annotated_records,
    valid_records,
)
from .test_cli import pipeline
from .test_service import decisions_payload, fresh_records

CORPUS = DATA_DIR / "published_corpus.jsonl"

PROPERTY_TIMES: dict[str, float] = {}
PROPERTY_BUDGET_SECONDS = 60.0
PROPERTY_SETTINGS = settings(
    max_examples=1000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)


def ok(line: str) -> None:
    print(f"ACCEPTANCE PASS: {line}")


def timed_suite(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.monotonic()
            result = fn(*args, **kwargs)
            PROPERTY_TIMES[name] = time.monotonic() - start
            ok(f"property suite '{name}' green at 1000 cases ({PROPERTY_TIMES[name]:.1f}s)")
            return result

        return wrapper

    return decorate


# -- criterion: relation accounting ------------------------------------------


def test_relation_accounting_via_report_cli(tmp_path):
    start = time.monotonic()
    result = CliRunner().invoke(
        cli_main, ["report", "-d", str(CORPUS), "-o", str(tmp_path)], catch_exceptions=False
    )
    elapsed = time.monotonic() - start
    assert result.exit_code == 0, result.output
    assert "retrieved relations: 1635" in result.output
    assert "removed relations: 659" in result.output
    assert "remaining relations: 976" in result.output
    assert elapsed < 5.0, f"report took {elapsed:.2f}s, budget is 5s"
    ok(f"relation accounting 1635/659/976 exact, report ran in {elapsed:.2f}s")


# -- criterion: distribution reproduction -------------------------------------


def test_distribution_reproduction():
    records = load_dataset(CORPUS)
    retrieved = relation_distribution(records, WhichBundle.RETRIEVED)
    filtered = relation_distribution(records, WhichBundle.FILTERED)
    for label, expected in [("RelatedTo", 40.4), ("AtLocation", 13.0), ("IsA", 8.4)]:
        assert retrieved.percentages[label] == pytest.approx(expected, abs=0.2)
    for label, expected in [("RelatedTo", 31.6), ("AtLocation", 16.2), ("Synonym", 11.2)]:
        assert filtered.percentages[label] == pytest.approx(expected, abs=0.2)
    ok(
        "distributions within 0.2pp: retrieved "
        f"{retrieved.percentages['RelatedTo']}/{retrieved.percentages['AtLocation']}/"
        f"{retrieved.percentages['IsA']}, filtered "
        f"{filtered.percentages['RelatedTo']}/{filtered.percentages['AtLocation']}/"
        f"{filtered.percentages['Synonym']}"
    )


# -- criterion: matrix reproduction --------------------------------------------


def test_matrix_reproduction():
    records = load_dataset(CORPUS)
    full = build_matrix(records, GenerationCondition.FULL_KNOWLEDGE)
    filtered = build_matrix(records, GenerationCondition.FILTERED_KNOWLEDGE)
    assert full.cells() == {"n11": 111, "n10": 10, "n01": 0, "n00": 0}
    assert filtered.cells() == {"n11": 8, "n10": 34, "n01": 25, "n00": 54}
    assert summarize(full).both_correct == 91.7
    filtered_summary = summarize(filtered)
    assert filtered_summary.both_correct == 6.6
    assert filtered_summary.coverage_fail_rate == 72.7
    ok("matrices exact; rates 91.7% / 6.6% bothCorrect, 72.7% coverage-fail")


# -- criterion: coverage oracle -------------------------------------------------

BENCHMARK_PAIRS = [
    ("A dog is racing against another dog in a race.", ["dog", "pull", "race"], ["pull"], 0),
    ("A man is looking at a window.", ["look", "watch", "window"], ["watch"], 0),
    ("Boats sail on a sunny day.", ["boat", "sail", "day"], [], 1),
]

# 50 hand-built cases: (concept, sentence, expected covered bit).
COVERAGE_TABLE = [
    ("dog", "two dogs run fast", 1),
    ("race", "he was racing hard", 1),
    ("look", "she is looking away", 1),
    ("run", "running far today", 1),
    ("stop", "the car stopped", 1),
    ("party", "three parties tonight", 1),
    ("box", "boxes on the floor", 1),
    ("watch", "two watches tick", 1),
    ("race", "they raced home", 1),
    ("jump", "he jumped high", 1),
    ("fly", "flies buzz around", 1),
    ("agree", "they agreed politely", 1),
    ("horse", "wild horses gallop", 1),
    ("house", "many houses stand", 1),
    ("pull", "pulling the rope", 1),
    ("eye", "her eyes sparkle", 1),
    ("sit", "sitting quietly", 1),
    ("cry", "the baby cries", 1),
    ("hope", "hoping for rain", 1),
    ("dish", "dirty dishes pile", 1),
    ("tree", "tall trees sway", 1),
    ("speed", "speeding cars pass", 1),
    ("glass", "a glass of water", 1),
    ("carry", "he carries wood", 1),
    ("play", "children playing games", 1),
    ("snow", "it snowed all night", 1),
    ("sing", "he sings well", 1),
    ("sea", "seas are rough", 1),
    ("dog", "Dogs bark loudly.", 1),
    ("bus", "the bus stops", 1),
    ("see", "seeing is believing", 1),
    ("wrist_watch", "a wrist watch gleams", 1),
    ("ice_cream", "eating ice cream now", 1),
    ("ice_cream", "an ice-cream stand", 1),
    ("wrist_watch", "wrist watches everywhere", 1),
    ("pull", "a dog is racing in a race", 0),
    ("watch", "a man is looking at a window", 0),
    ("run", "a runner appears", 0),
    ("pull", "he tugs the rope", 0),
    ("race", "he paced around", 0),
    ("day", "the dog barks", 0),
    ("look", "the outlook is good", 0),
    ("car", "the cart rolled", 0),
    ("night", "a knight rides", 0),
    ("bar", "barns everywhere", 0),
    ("read", "ready to go", 0),
    ("fence", "offense taken", 0),
    ("wrist_watch", "the watch on his wrist", 0),
    ("wrist_watch", "wrist and watch", 0),
    ("sun", "a sunny day", 0),
]


def test_coverage_oracle_benchmark_pairs_and_table():
    for sentence, concepts, expected_missing, expected_bit in BENCHMARK_PAIRS:
        result = check_coverage(sentence, ConceptSet.build(concepts))
        assert [c.surface for c in result.missing] == expected_missing
        assert result.bit == expected_bit
    assert len(COVERAGE_TABLE) == 50
    failures = []
    for concept, sentence, expected in COVERAGE_TABLE:
        cset = ConceptSet.build([concept, "zz", "qq"])
        result = check_coverage(sentence, cset)
        got = 1 if concept in {c.surface for c in result.covered} else 0
        if got != expected:
            failures.append((concept, sentence, expected, got))
    assert not failures, f"coverage table mismatches: {failures}"
    ok("coverage oracle: 3 benchmark pairs exact, 50-case table 100%")


# -- criterion: worked-example replay -------------------------------------------


def test_worked_example_replay(lww_set, lww_bundle, lww_decisions):
    filtered = apply_filter(lww_bundle, lww_decisions)
    assert filtered.size() == 11

    knowledge_text = render_knowledge(filtered)
    prompt = build_prompt(lww_set, filtered)
    assert prompt.endswith(knowledge_text)
    parsed = parse_relations(knowledge_text)
    tails = [r.tail for r in parsed.relations()]
    assert len(tails) == 11
    assert set(tails) & {"see", "seeing", "looking"} == set()
    assert "look" not in tails  # removed as a tail; survives only as a concept
    assert set(tails) == {
        "glance", "eyes", "view", "time", "wrist", "clock", "clook",
        "glass", "opening", "house", "wall",
    }
    ok("worked-example replay: 4 removals leave 11 relations, prompt omits see/seeing/look/looking")


# -- criterion: property suites --------------------------------------------------

_ROUND_TRIP_DIR = Path(tempfile.mkdtemp(prefix="kitgi-acceptance-"))


@timed_suite("persistence round-trip")
@PROPERTY_SETTINGS
@given(valid_records())
def test_property_persistence_round_trip(record):
    path = _ROUND_TRIP_DIR / "round_trip.jsonl"
    save_dataset([record], path)
    assert load_dataset(path) == [record]


@timed_suite("prompt render/parse round-trip")
@PROPERTY_SETTINGS
@given(bundled_sets())
def test_property_prompt_round_trip(pair):
    _, bundle = pair
    parsed = parse_relations(render_knowledge(bundle))
    original = {
        c.surface: [(r.rank, r.rel_type.label, r.tail) for r in rels]
        for c, rels in bundle.per_concept.items()
    }
    recovered = {
        c.surface: [(r.rank, r.rel_type.label, r.tail) for r in rels]
        for c, rels in parsed.per_concept.items()
    }
    assert recovered == original


@timed_suite("filter projection/idempotence")
@PROPERTY_SETTINGS
@given(bundled_sets(), st.data())
def test_property_filter_projection(pair, data):
    _, bundle = pair
    decisions = data.draw(decision_lists(bundle))
    once = apply_filter(bundle, decisions)
    assert apply_filter(once, decisions) == once
    assert once.relation_ids() <= bundle.relation_ids()


@timed_suite("distribution conservation per relation type")
@PROPERTY_SETTINGS
@given(st.lists(knowledge_records(), min_size=1, max_size=3))
def test_property_distribution_conservation(records):
    retrieved: dict[str, int] = {}
    filtered: dict[str, int] = {}
    removed: dict[str, int] = {}
    for record in records:
        by_id = record.retrieved_knowledge.by_id()
        for rel in record.retrieved_knowledge.relations():
            retrieved[rel.rel_type.label] = retrieved.get(rel.rel_type.label, 0) + 1
        for rel in record.filtered_knowledge.relations():
            filtered[rel.rel_type.label] = filtered.get(rel.rel_type.label, 0) + 1
        from kitgi.model import resolve_decisions

        for decision in resolve_decisions(record.decisions).values():
            if decision.verdict == Verdict.REMOVE:
                label = by_id[decision.relation_id].rel_type.label
                removed[label] = removed.get(label, 0) + 1
    for label, count in retrieved.items():
        assert count == filtered.get(label, 0) + removed.get(label, 0)


@timed_suite("stemmer idempotence")
@PROPERTY_SETTINGS
@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=14))
def test_property_stemmer_idempotent(word):
    assert stem(stem(word)) == stem(word)


@timed_suite("coverage monotonicity")
@PROPERTY_SETTINGS
@given(
    st.lists(st.sampled_from("dog race pull look watch window boat sail day lamp".split()),
             min_size=3, max_size=5, unique=True),
    st.lists(st.sampled_from("dogs racing pulled looks watched windows sails days it the".split()),
             min_size=0, max_size=6),
    st.lists(st.sampled_from("dogs racing pulled looks watched windows sails days it the".split()),
             min_size=0, max_size=4),
)
def test_property_coverage_monotonic(concepts, base_tokens, extra_tokens):
    cset = ConceptSet.build(concepts)
    before = check_coverage(" ".join(["it"] + base_tokens), cset)
    after = check_coverage(" ".join(["it"] + base_tokens + extra_tokens), cset)
    assert {c.surface for c in before.covered} <= {c.surface for c in after.covered}


@timed_suite("batch length law")
@PROPERTY_SETTINGS
@given(st.integers(min_value=0, max_value=8), st.data())
def test_property_batch_length_law(n, data):
    fail = data.draw(st.sets(st.integers(min_value=0, max_value=max(0, n - 1)), max_size=n))
    inputs = [
        (ConceptSet.build([f"failme{i}" if i in fail else f"a{i}", f"b{i}", f"c{i}"]), None)
        for i in range(n)
    ]
    flaky = lambda prompt: "" if "failme" in prompt else real_stub_complete(prompt)
    with mock.patch("kitgi.generation._stub_complete", side_effect=flaky):
        result = generate_batch(inputs, GenerationCondition.NO_KNOWLEDGE, stub_backend())
    assert result.success_count() + len(result.failures) == n
    assert {f.index for f in result.failures} == fail
    for sentence in result.sentences:
        if sentence is not None:
            assert sentence.condition == GenerationCondition.NO_KNOWLEDGE


@timed_suite("matrix cell conservation")
@PROPERTY_SETTINGS
@given(st.lists(light_annotated_records(), min_size=1, max_size=5))
def test_property_matrix_conservation(records):
    for condition in GenerationCondition:
        matrix = build_matrix(records, condition)
        assert matrix.n11 + matrix.n10 + matrix.n01 + matrix.n00 == matrix.total == len(records)


def test_property_suites_within_budget():
    assert len(PROPERTY_TIMES) == 8, f"expected 8 property suites, saw {sorted(PROPERTY_TIMES)}"
    total = sum(PROPERTY_TIMES.values())
    assert total < PROPERTY_BUDGET_SECONDS, f"property suites took {total:.1f}s"
    ok(f"all 8 property suites finished in {total:.1f}s (< {PROPERTY_BUDGET_SECONDS:.0f}s)")


# -- criterion: end-to-end stub run ----------------------------------------------


def test_end_to_end_stub_run_is_deterministic(tmp_path):
    dir_a = tmp_path / "run_a"
    dir_b = tmp_path / "run_b"
    dir_a.mkdir()
    dir_b.mkdir()
    pipeline(dir_a)
    pipeline(dir_b)
    compared = ["dataset.jsonl"] + [
        f"reports/{name}"
        for name in (
            "distribution_full.csv",
            "distribution_filtered.csv",
            "matrix_full.csv",
            "matrix_filtered.csv",
            "summary.json",
        )
    ]
    for rel in compared:
        assert (dir_a / rel).read_bytes() == (dir_b / rel).read_bytes(), rel
    records = load_dataset(dir_a / "dataset.jsonl")
    assert len(records) == 10
    assert all(r.sentence_full is not None for r in records)
    ok("end-to-end stub pipeline: two runs byte-identical across dataset and reports")


# -- criterion: service contract --------------------------------------------------


def test_service_contract_stress_and_restart(tmp_path):
    records = fresh_records(200)
    store = TaskStore(records, tmp_path)
    leases: list[str] = []
    lease_lock = threading.Lock()
    submitted_before_kill = 100
    submit_count = [0]

    def annotator(name):
        while True:
            with lease_lock:
                if submit_count[0] >= submitted_before_kill:
                    return
            task = store.lease_task(name, STAGE_FILTER)
            if task is None:
                return
            with lease_lock:
                leases.append(task.task_id)
            record = store.record(task.record_id)
            store.submit_decisions(task.task_id, name, decisions_payload(record, set()))
            with lease_lock:
                submit_count[0] += 1

    threads = [threading.Thread(target=annotator, args=(f"w{i}",)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(leases) == len(set(leases)), "double-lease before restart"
    completed_before = store.progress()["stages"][STAGE_FILTER]["completed"]
    assert completed_before >= submitted_before_kill
    # Simulated kill: abandon the store mid-run and rebuild from the log.
    store.close()

    reopened = TaskStore(fresh_records(200), tmp_path)
    assert (
        reopened.progress()["stages"][STAGE_FILTER]["completed"] == completed_before
    ), "completed submissions lost across restart"

    drained: list[str] = []

    def drainer(name):
        while True:
            task = reopened.lease_task(name, STAGE_FILTER)
            if task is None:
                return
            with lease_lock:
                drained.append(task.task_id)
            record = reopened.record(task.record_id)
            reopened.submit_decisions(task.task_id, name, decisions_payload(record, set()))

    threads = [threading.Thread(target=drainer, args=(f"w{i}",)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(drained) == len(set(drained)), "double-lease after restart"
    assert set(drained) & set(leases) == set(), "completed task re-leased"
    progress = reopened.progress()["stages"][STAGE_FILTER]
    assert progress["completed"] == progress["total"] == 200
    assert progress["open"] == 0 and progress["leased"] == 0
    ok(
        "service contract: 8 annotators, 200 tasks, zero double-leases, "
        f"restart preserved {completed_before} completions, drained to 200/200"
    )
