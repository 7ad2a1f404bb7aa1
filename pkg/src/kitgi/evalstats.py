"""Commonsense/coverage matrices, improved-subset selection, report files.

Reports always emit raw counts next to rates, since published figures mix
integer and one-decimal rounding. Output is deterministic: identical corpora
produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .ablation import EmptyCorpusError, WhichBundle, relation_distribution
from .model import GenerationCondition, KitgiRecord, Verdict, resolve_decisions

REPORT_FILES = (
    "distribution_full.csv",
    "distribution_filtered.csv",
    "matrix_full.csv",
    "matrix_filtered.csv",
    "summary.json",
)


class MissingAnnotationError(Exception):
    def __init__(self, condition: GenerationCondition, record_ids: list[str]):
        self.condition = condition
        self.record_ids = record_ids
        super().__init__(
            f"records missing {condition.value} annotation: {', '.join(record_ids)}"
        )


@dataclass(frozen=True)
class EvalMatrix:
    """2x2 counts; first index is the commonsense bit, second is coverage."""

    n11: int
    n10: int
    n01: int
    n00: int
    total: int

    def cells(self) -> dict[str, int]:
        return {"n11": self.n11, "n10": self.n10, "n01": self.n01, "n00": self.n00}


@dataclass(frozen=True)
class MatrixSummary:
    both_correct: float
    commonsense_rate: float
    coverage_rate: float
    coverage_fail_rate: float


def round_half_up(value: float, digits: int = 1) -> float:
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def build_matrix(records: list[KitgiRecord], condition: GenerationCondition) -> EvalMatrix:
    if not records:
        raise EmptyCorpusError("no records to aggregate")
    missing = [r.id for r in records if condition not in r.annotations]
    if missing:
        raise MissingAnnotationError(condition, missing)
    cells = {"n11": 0, "n10": 0, "n01": 0, "n00": 0}
    for record in records:
        ann = record.annotations[condition]
        cells[f"n{ann.commonsense}{ann.coverage}"] += 1
    return EvalMatrix(total=len(records), **cells)


def summarize(matrix: EvalMatrix) -> MatrixSummary:
    total = matrix.total
    if total <= 0:
        raise EmptyCorpusError("matrix total is zero")
    pct = lambda n: round_half_up(100.0 * n / total)
    return MatrixSummary(
        both_correct=pct(matrix.n11),
        commonsense_rate=pct(matrix.n11 + matrix.n10),
        coverage_rate=pct(matrix.n11 + matrix.n01),
        coverage_fail_rate=pct(matrix.n10 + matrix.n00),
    )


def select_improved(records: list[KitgiRecord]) -> list[str]:
    """Record ids that flipped implausible -> plausible once knowledge was added."""
    missing: list[str] = []
    for record in records:
        if (
            GenerationCondition.NO_KNOWLEDGE not in record.annotations
            or GenerationCondition.FULL_KNOWLEDGE not in record.annotations
        ):
            missing.append(record.id)
    if missing:
        raise MissingAnnotationError(GenerationCondition.NO_KNOWLEDGE, missing)
    return [
        record.id
        for record in records
        if record.annotations[GenerationCondition.NO_KNOWLEDGE].commonsense == 0
        and record.annotations[GenerationCondition.FULL_KNOWLEDGE].commonsense == 1
    ]


def relation_accounting(records: list[KitgiRecord]) -> dict[str, int]:
    retrieved = sum(r.retrieved_knowledge.size() for r in records)
    remaining = sum(r.filtered_knowledge.size() for r in records)
    removed_decisions = sum(
        1
        for r in records
        for d in resolve_decisions(r.decisions).values()
        if d.verdict == Verdict.REMOVE
    )
    return {
        "retrieved": retrieved,
        "removed": retrieved - remaining,
        "remaining": remaining,
        "remove_decisions": removed_decisions,
    }


def failure_variant_tally(
    records: list[KitgiRecord], condition: GenerationCondition
) -> dict[str, int]:
    """Variant counts over failing annotations; untagged failures count as Unclassified."""
    tally: dict[str, int] = {}
    for record in records:
        ann = record.annotations.get(condition)
        if ann is None or (ann.commonsense == 1 and ann.coverage == 1):
            continue
        key = ann.failure_variant.value if ann.failure_variant else "Unclassified"
        tally[key] = tally.get(key, 0) + 1
    return dict(sorted(tally.items()))


def _write_distribution_csv(path: Path, records: list[KitgiRecord], which: WhichBundle) -> None:
    dist = relation_distribution(records, which)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["relation_type", "count", "percent"])
        for label, count in dist.counts.items():
            writer.writerow([label, count, f"{dist.percentages[label]:.1f}"])
        writer.writerow(["TOTAL", dist.total, "100.0"])


def _write_matrix_csv(path: Path, matrix: EvalMatrix | None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "commonsense", "coverage", "count"])
        if matrix is None:
            return
        writer.writerow(["n11", 1, 1, matrix.n11])
        writer.writerow(["n10", 1, 0, matrix.n10])
        writer.writerow(["n01", 0, 1, matrix.n01])
        writer.writerow(["n00", 0, 0, matrix.n00])
        writer.writerow(["TOTAL", "", "", matrix.total])


def _matrix_section(records: list[KitgiRecord], condition: GenerationCondition):
    annotated = [r for r in records if condition in r.annotations]
    if len(annotated) != len(records) or not annotated:
        return None, None
    matrix = build_matrix(records, condition)
    return matrix, summarize(matrix)


def emit_report(records: list[KitgiRecord], out_dir: str | Path) -> list[Path]:
    """Write the five fixed-name report files and return their paths.

    Matrix sections are filled only when every record carries the annotation
    for that condition; otherwise the CSV holds just its header and the
    summary marks the section null.
    """
    if not records:
        raise EmptyCorpusError("no records to report on")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    paths = [out / name for name in REPORT_FILES]
    _write_distribution_csv(out / "distribution_full.csv", records, WhichBundle.RETRIEVED)
    _write_distribution_csv(out / "distribution_filtered.csv", records, WhichBundle.FILTERED)

    matrix_full, summary_full = _matrix_section(records, GenerationCondition.FULL_KNOWLEDGE)
    matrix_filtered, summary_filtered = _matrix_section(
        records, GenerationCondition.FILTERED_KNOWLEDGE
    )
    _write_matrix_csv(out / "matrix_full.csv", matrix_full)
    _write_matrix_csv(out / "matrix_filtered.csv", matrix_filtered)

    def matrix_json(matrix: EvalMatrix | None, summary: MatrixSummary | None):
        if matrix is None or summary is None:
            return None
        return {
            "cells": matrix.cells(),
            "total": matrix.total,
            "rates": {
                "both_correct": summary.both_correct,
                "commonsense": summary.commonsense_rate,
                "coverage": summary.coverage_rate,
                "coverage_fail": summary.coverage_fail_rate,
            },
        }

    retrieved_dist = relation_distribution(records, WhichBundle.RETRIEVED)
    filtered_dist = relation_distribution(records, WhichBundle.FILTERED)
    shift = {}
    for label in retrieved_dist.counts:
        before = retrieved_dist.percentages.get(label, 0.0)
        after = filtered_dist.percentages.get(label, 0.0)
        shift[label] = {
            "retrieved_pct": before,
            "filtered_pct": after,
            "change_points": round_half_up(after - before),
            "relative_change_pct": round_half_up(100.0 * (after - before) / before)
            if before
            else None,
        }

    summary_doc = {
        "records": len(records),
        "relation_accounting": relation_accounting(records),
        "distribution_shift": shift,
        "matrix_full": matrix_json(matrix_full, summary_full),
        "matrix_filtered": matrix_json(matrix_filtered, summary_filtered),
        "failure_variants": {
            GenerationCondition.FULL_KNOWLEDGE.value: failure_variant_tally(
                records, GenerationCondition.FULL_KNOWLEDGE
            ),
            GenerationCondition.FILTERED_KNOWLEDGE.value: failure_variant_tally(
                records, GenerationCondition.FILTERED_KNOWLEDGE
            ),
        },
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
