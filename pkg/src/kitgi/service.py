"""HTTP service for the human-in-the-loop filtering and labeling stages.

State model: the source corpus is immutable; every submission is appended to
``events.jsonl`` (fsynced) and folded into in-memory records. Restart replays
the log, so completed work survives crashes. Leases are in-memory only; after
a restart open tasks are simply leasable again.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, Query, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import ablation
from .coverage import CoverageResult, check_coverage
from .dataset import (
    annotation_to_json,
    bundle_to_json,
    concept_set_to_json,
    decision_from_json,
    decision_to_json,
    record_to_json,
    record_to_line,
    sentence_to_json,
)
from .model import (
    Annotation,
    DecisionSource,
    FailureVariant,
    FilterDecision,
    GenerationCondition,
    KitgiRecord,
    Verdict,
    format_timestamp,
    resolve_decisions,
    utc_now,
    validate_record,
)

DEFAULT_LEASE_SECONDS = 900.0

STAGE_FILTER = "FilterRelations"
STAGE_LABEL = "LabelSentence"
STAGES = (STAGE_FILTER, STAGE_LABEL)


class ServiceError(Exception):
    def __init__(self, code: str, message: str, status: int = 400, detail=None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status
        self.detail = detail


@dataclass
class Task:
    task_id: str
    record_id: str
    stage: str
    condition: GenerationCondition | None = None
    assignee: str | None = None
    lease_expiry: float | None = None
    completed: bool = False
    payload_fingerprint: str | None = None


def _coverage_to_json(result: CoverageResult) -> dict:
    return {
        "bit": result.bit,
        "covered": [c.surface for c in result.covered],
        "missing": [c.surface for c in result.missing],
        "matches": {c.surface: tok for c, tok in result.matches.items()},
    }


class TaskStore:
    """Thread-safe task queue and submission log over one corpus."""

    def __init__(
        self,
        records: list[KitgiRecord],
        data_dir: str | Path,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock=time.monotonic,
    ):
        self._records: dict[str, KitgiRecord] = {r.id: r for r in records}
        self._order = [r.id for r in records]
        self._lease_seconds = lease_seconds
        self._clock = clock
        self._lock = threading.Lock()
        self._tasks: dict[str, Task] = {}

        self._data_dir = Path(data_dir)
        self._data_dir.mkdir(parents=True, exist_ok=True)
        self._log_path = self._data_dir / "events.jsonl"
        self._replay_log()
        self._log_fh = open(self._log_path, "a", encoding="utf-8")
        self._build_tasks()

    # -- setup --------------------------------------------------------------

    def _label_conditions(self, record: KitgiRecord) -> list[GenerationCondition]:
        """Label tasks exist only for conditions whose sentence was generated."""
        out = []
        for condition in GenerationCondition:
            if record.sentence_for(condition) is not None:
                out.append(condition)
        return out

    def _decisions_complete(self, record: KitgiRecord) -> bool:
        decided = set(resolve_decisions(record.decisions))
        return record.retrieved_knowledge.relation_ids() <= decided

    def _build_tasks(self) -> None:
        for rid in self._order:
            record = self._records[rid]
            filter_task = Task(task_id=f"filter:{rid}", record_id=rid, stage=STAGE_FILTER)
            filter_task.completed = self._decisions_complete(record)
            self._tasks[filter_task.task_id] = filter_task
            for condition in self._label_conditions(record):
                task = Task(
                    task_id=f"label:{rid}:{condition.value}",
                    record_id=rid,
                    stage=STAGE_LABEL,
                    condition=condition,
                )
                task.completed = condition in record.annotations
                self._tasks[task.task_id] = task
        for task_id, fingerprint in self._replayed_fingerprints.items():
            if task_id in self._tasks:
                self._tasks[task_id].payload_fingerprint = fingerprint

    def _replay_log(self) -> None:
        self._replayed_fingerprints: dict[str, str] = {}
        if not self._log_path.exists():
            return
        with open(self._log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["type"] == "decisions":
                    self._fold_decisions(event)
                elif event["type"] == "label":
                    self._fold_label(event)

    def _append_event(self, event: dict) -> None:
        self._log_fh.write(json.dumps(event, ensure_ascii=False, separators=(",", ":")))
        self._log_fh.write("\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    # -- folding events into records -----------------------------------------

    def _fold_decisions(self, event: dict) -> None:
        record = self._records.get(event["record_id"])
        if record is None:
            return
        decisions = [decision_from_json(d) for d in event["decisions"]]
        filtered = ablation.apply_filter(record.retrieved_knowledge, decisions)
        self._records[record.id] = replace(
            record, decisions=decisions, filtered_knowledge=filtered
        )
        self._replayed_fingerprints[event["task_id"]] = _fingerprint(event["decisions"])

    def _fold_label(self, event: dict) -> None:
        record = self._records.get(event["record_id"])
        if record is None:
            return
        condition = GenerationCondition(event["condition"])
        annotation = Annotation(
            commonsense=event["commonsense"],
            coverage=event["coverage"],
            annotator_id=event["annotator_id"],
            failure_variant=FailureVariant(event["failure_variant"])
            if event.get("failure_variant")
            else None,
            note=event.get("note"),
            coverage_auto=event.get("coverage_auto"),
            created_at=utc_now(),
        )
        annotations = dict(record.annotations)
        annotations[condition] = annotation
        self._records[record.id] = replace(record, annotations=annotations)
        self._replayed_fingerprints[event["task_id"]] = _fingerprint(
            [event["commonsense"], event["coverage"], event.get("failure_variant")]
        )

    # -- task operations -----------------------------------------------------

    def lease_task(self, annotator_id: str, stage: str) -> Task | None:
        if stage not in STAGES:
            raise ServiceError("UnknownStage", f"unknown stage {stage!r}", status=400)
        if not annotator_id:
            raise ServiceError("MissingAnnotator", "annotator id must be non-empty", status=400)
        with self._lock:
            now = self._clock()
            for rid in self._order:
                for task in self._tasks_for(rid, stage):
                    if task.completed:
                        continue
                    if task.lease_expiry is not None and task.lease_expiry > now:
                        continue
                    task.assignee = annotator_id
                    task.lease_expiry = now + self._lease_seconds
                    return replace(task)
        return None

    def _tasks_for(self, record_id: str, stage: str) -> list[Task]:
        return [
            t
            for t in self._tasks.values()
            if t.record_id == record_id and t.stage == stage
        ]

    def _checked_task(self, task_id: str, annotator_id: str, stage: str) -> Task:
        task = self._tasks.get(task_id)
        if task is None:
            raise ServiceError("UnknownTask", f"no task {task_id!r}", status=404)
        if task.stage != stage:
            raise ServiceError(
                "WrongStage", f"task {task_id!r} is a {task.stage} task", status=400
            )
        if task.assignee != annotator_id:
            raise ServiceError(
                "NotLeaseHolder",
                f"task {task_id!r} is not leased to {annotator_id!r}",
                status=409,
            )
        if task.lease_expiry is None or task.lease_expiry <= self._clock():
            raise ServiceError("LeaseExpired", f"lease on {task_id!r} expired", status=409)
        return task

    def submit_decisions(self, task_id: str, annotator_id: str, decisions: list[dict]) -> dict:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise ServiceError("UnknownTask", f"no task {task_id!r}", status=404)
            fingerprint = _fingerprint(decisions)
            if task.completed:
                if task.payload_fingerprint == fingerprint:
                    record = self._records[task.record_id]
                    return {"accepted": True, "filtered_count": record.filtered_knowledge.size()}
                raise ServiceError(
                    "TaskAlreadyCompleted",
                    f"task {task_id!r} was already completed with a different payload",
                    status=409,
                )
            self._checked_task(task_id, annotator_id, STAGE_FILTER)
            record = self._records[task.record_id]

            parsed: list[FilterDecision] = []
            for d in decisions:
                try:
                    verdict = Verdict(d["verdict"])
                    source = DecisionSource(d.get("source", "Human"))
                except (KeyError, ValueError) as exc:
                    raise ServiceError("BadDecision", f"malformed decision: {exc}", status=400)
                parsed.append(
                    FilterDecision(
                        relation_id=d["relation_id"],
                        verdict=verdict,
                        source=source,
                        annotator_id=annotator_id,
                        rationale=d.get("rationale"),
                    )
                )

            retrieved_ids = record.retrieved_knowledge.relation_ids()
            decided = {d.relation_id for d in parsed}
            undecided = sorted(retrieved_ids - decided)
            if undecided:
                raise ServiceError(
                    "Undecided",
                    "every relation needs an explicit Keep or Remove verdict",
                    status=400,
                    detail={"relation_ids": undecided},
                )
            unknown = sorted(decided - retrieved_ids)
            if unknown:
                raise ServiceError(
                    "UnknownRelation",
                    "decisions reference relations outside this record",
                    status=400,
                    detail={"relation_ids": unknown},
                )

            filtered = ablation.apply_filter(
                record.retrieved_knowledge, parsed, require_known=True
            )
            self._records[record.id] = replace(
                record, decisions=parsed, filtered_knowledge=filtered
            )
            self._append_event(
                {
                    "type": "decisions",
                    "task_id": task_id,
                    "record_id": record.id,
                    "annotator_id": annotator_id,
                    "decisions": [decision_to_json(d) for d in parsed],
                    "submitted_at": format_timestamp(utc_now()),
                }
            )
            task.completed = True
            task.payload_fingerprint = fingerprint
            return {"accepted": True, "filtered_count": filtered.size()}

    def submit_label(
        self,
        task_id: str,
        annotator_id: str,
        commonsense: int,
        coverage_override: int | None = None,
        failure_variant: str | None = None,
        note: str | None = None,
    ) -> dict:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise ServiceError("UnknownTask", f"no task {task_id!r}", status=404)
            fingerprint = _fingerprint([commonsense, coverage_override, failure_variant])
            if task.completed:
                if task.payload_fingerprint == fingerprint:
                    return {"accepted": True}
                raise ServiceError(
                    "TaskAlreadyCompleted",
                    f"task {task_id!r} was already completed with a different payload",
                    status=409,
                )
            self._checked_task(task_id, annotator_id, STAGE_LABEL)
            if commonsense not in (0, 1):
                raise ServiceError("BadBit", f"commonsense bit {commonsense!r} not in {{0,1}}")
            if coverage_override is not None and coverage_override not in (0, 1):
                raise ServiceError("BadBit", f"coverage bit {coverage_override!r} not in {{0,1}}")

            record = self._records[task.record_id]
            condition = task.condition
            sentence = record.sentence_for(condition)
            auto = check_coverage(sentence.text, record.concept_set).bit
            coverage = coverage_override if coverage_override is not None else auto

            variant: FailureVariant | None = None
            if failure_variant:
                try:
                    variant = FailureVariant(failure_variant)
                except ValueError:
                    raise ServiceError(
                        "BadVariant", f"unknown failure variant {failure_variant!r}"
                    )
                if commonsense == 1 and coverage == 1:
                    raise ServiceError(
                        "VariantWithoutFailure",
                        "failure variant is only valid when a bit is 0",
                    )

            annotation = Annotation(
                commonsense=commonsense,
                coverage=coverage,
                annotator_id=annotator_id,
                failure_variant=variant,
                note=note,
                coverage_auto=auto,
                created_at=utc_now(),
            )
            annotations = dict(record.annotations)
            annotations[condition] = annotation
            self._records[record.id] = replace(record, annotations=annotations)
            self._append_event(
                {
                    "type": "label",
                    "task_id": task_id,
                    "record_id": record.id,
                    "condition": condition.value,
                    "annotator_id": annotator_id,
                    "commonsense": commonsense,
                    "coverage": coverage,
                    "coverage_auto": auto,
                    "coverage_override": coverage_override,
                    "failure_variant": failure_variant,
                    "note": note,
                    "submitted_at": format_timestamp(utc_now()),
                }
            )
            task.completed = True
            task.payload_fingerprint = fingerprint
            return {"accepted": True}

    # -- views ----------------------------------------------------------------

    def task_payload(self, task: Task) -> dict:
        record = self._records[task.record_id]
        if task.stage == STAGE_FILTER:
            suggestions = ablation.suggest_removals(
                record.concept_set, record.retrieved_knowledge
            )
            return {
                "concept_set": concept_set_to_json(record.concept_set),
                "relations": bundle_to_json(record.retrieved_knowledge),
                "suggestions": [
                    {"relation_id": s.relation_id, "reason": s.reason.value, "evidence": s.evidence}
                    for s in suggestions
                ],
            }
        sentence = record.sentence_for(task.condition)
        return {
            "concept_set": concept_set_to_json(record.concept_set),
            "condition": task.condition.value,
            "sentence": sentence_to_json(sentence),
            "coverage_auto": _coverage_to_json(
                check_coverage(sentence.text, record.concept_set)
            ),
        }

    def task_view(self, task: Task) -> dict:
        return {
            "task_id": task.task_id,
            "record_id": task.record_id,
            "stage": task.stage,
            "condition": task.condition.value if task.condition else None,
            "assignee": task.assignee,
            "lease_seconds_remaining": max(0.0, (task.lease_expiry or 0.0) - self._clock()),
            "payload": self.task_payload(task),
        }

    def progress(self) -> dict:
        with self._lock:
            now = self._clock()
            stages = {}
            for stage in STAGES:
                tasks = [t for t in self._tasks.values() if t.stage == stage]
                completed = sum(1 for t in tasks if t.completed)
                leased = sum(
                    1
                    for t in tasks
                    if not t.completed
                    and t.lease_expiry is not None
                    and t.lease_expiry > now
                )
                stages[stage] = {
                    "total": len(tasks),
                    "completed": completed,
                    "leased": leased,
                    "open": len(tasks) - completed - leased,
                }
            matrices = {}
            for condition in GenerationCondition:
                cells = {"n11": 0, "n10": 0, "n01": 0, "n00": 0}
                annotated = 0
                for record in self._records.values():
                    ann = record.annotations.get(condition)
                    if ann is None:
                        continue
                    annotated += 1
                    cells[f"n{ann.commonsense}{ann.coverage}"] += 1
                matrices[condition.value] = {"annotated": annotated, "cells": cells}
            return {"stages": stages, "matrices": matrices}

    def record(self, record_id: str) -> KitgiRecord:
        record = self._records.get(record_id)
        if record is None:
            raise ServiceError("UnknownRecord", f"no record {record_id!r}", status=404)
        return record

    def export_records(self) -> list[KitgiRecord]:
        """Current corpus state, restricted to validation-clean records."""
        with self._lock:
            return [
                record
                for rid in self._order
                if not validate_record(record := self._records[rid])
            ]

    def records(self) -> list[KitgiRecord]:
        with self._lock:
            return [self._records[rid] for rid in self._order]

    def close(self) -> None:
        self._log_fh.close()


def _fingerprint(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# -- HTTP layer ---------------------------------------------------------------


class DecisionItem(BaseModel):
    relation_id: str
    verdict: str
    source: str = "Human"
    rationale: str | None = None


class DecisionsBody(BaseModel):
    annotator_id: str
    decisions: list[DecisionItem] = Field(default_factory=list)


class LabelBody(BaseModel):
    annotator_id: str
    commonsense: int
    coverage_override: int | None = None
    failure_variant: str | None = None
    note: str | None = None


def _error_response(exc: ServiceError) -> JSONResponse:
    return JSONResponse(
        status_code=exc.status,
        content={"error": {"code": exc.code, "message": exc.message, "detail": exc.detail}},
    )


def create_app(store: TaskStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="kitgi annotation service")

    @app.exception_handler(ServiceError)
    async def handle_service_error(request, exc: ServiceError):
        return _error_response(exc)

    @app.get("/tasks/next")
    def next_task(stage: str = Query(...), annotator: str = Query(...)):
        task = store.lease_task(annotator, stage)
        if task is None:
            return Response(status_code=204)
        return store.task_view(task)

    @app.post("/tasks/{task_id}/decisions")
    def post_decisions(task_id: str, body: DecisionsBody):
        return store.submit_decisions(
            task_id, body.annotator_id, [d.model_dump() for d in body.decisions]
        )

    @app.post("/tasks/{task_id}/label")
    def post_label(task_id: str, body: LabelBody):
        return store.submit_label(
            task_id,
            body.annotator_id,
            body.commonsense,
            coverage_override=body.coverage_override,
            failure_variant=body.failure_variant,
            note=body.note,
        )

    @app.get("/progress")
    def progress():
        return store.progress()

    @app.get("/records/{record_id}")
    def get_record(record_id: str):
        return record_to_json(store.record(record_id))

    @app.get("/export")
    def export():
        def lines():
            for record in store.export_records():
                yield record_to_line(record) + "\n"

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
