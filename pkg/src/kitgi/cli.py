"""Command-line pipeline driver.

Subcommands map onto the workflow stages: import a CommonGen file, fetch
knowledge, generate under a condition, suggest and collect filter decisions,
serve the annotation UI, and emit reports/exports. Every subcommand is
idempotent on unchanged inputs.

Exit codes: 0 success, 1 user error, 2 backend or I/O failure.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import ablation, evalstats
from .conceptnet import ConceptNetClient, KnowledgeGraphError
from .coverage import format_rule_table
from .dataset import (
    DatasetError,
    import_commongen,
    load_dataset,
    new_record,
    record_to_line,
    save_dataset,
)
from .generation import (
    BackendKind,
    GenerationError,
    generate_batch,
    http_backend,
    stub_backend,
    subprocess_backend,
)
from .model import GenerationCondition, KnowledgeBundle, resolve_decisions, validate_record
from .prompting import DEFAULT_TEMPLATE, build_prompt, load_template

CONFIG_ENV = "KITGI_CONFIG"

EXIT_OK = 0
EXIT_USER = 1
EXIT_BACKEND = 2

_CONDITIONS = {
    "none": GenerationCondition.NO_KNOWLEDGE,
    "full": GenerationCondition.FULL_KNOWLEDGE,
    "filtered": GenerationCondition.FILTERED_KNOWLEDGE,
}


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: str | None) -> dict:
    config_path = path or os.environ.get(CONFIG_ENV)
    if not config_path:
        return {}
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read config {config_path}: {exc}", EXIT_USER)


def _pick(flag_value, config: dict, key: str, default):
    """Flags win over the config file, which wins over defaults."""
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _load(dataset_path: str):
    try:
        return load_dataset(dataset_path)
    except FileNotFoundError:
        _fail(f"dataset not found: {dataset_path}", EXIT_USER)
    except DatasetError as exc:
        _fail(str(exc), EXIT_USER)


def _save(records, dataset_path: str) -> None:
    try:
        save_dataset(records, dataset_path)
    except DatasetError as exc:
        _fail(str(exc), EXIT_USER)
    except OSError as exc:
        _fail(f"cannot write {dataset_path}: {exc}", EXIT_BACKEND)


def _template(path: str | None):
    if path is None:
        return DEFAULT_TEMPLATE
    try:
        return load_template(path)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        _fail(f"cannot load template {path}: {exc}", EXIT_USER)


@click.group()
@click.option("--config", "config_path", default=None, help="JSON config file (KITGI_CONFIG).")
@click.pass_context
def main(ctx, config_path):
    """Workbench for knowledge-ablation experiments on commonsense generation."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = _load_config(config_path)


@main.command("import")
@click.argument("commongen_path", type=click.Path())
@click.option("-o", "--output", required=True, help="Dataset file to write.")
def import_cmd(commongen_path, output):
    """Import CommonGen-style concept lists into a fresh dataset."""
    try:
        result = import_commongen(commongen_path)
    except OSError as exc:
        _fail(f"cannot read {commongen_path}: {exc}", EXIT_BACKEND)
    records = [new_record(cs) for cs in result.concept_sets]
    _save(records, output)
    click.echo(f"imported {len(records)} concept sets -> {output}")
    for skip in result.skipped:
        click.echo(f"skipped line {skip.line_no} ({skip.reason}): {skip.entry}")


@main.command("fetch-knowledge")
@click.option("-d", "--dataset", required=True, help="Dataset file to update in place.")
@click.option("--base-url", default=None, help="ConceptNet-compatible endpoint.")
@click.option("--cache-dir", default=None, help="Relation cache directory.")
@click.option("--fixture-dir", default=None, help="Offline fixture directory.")
@click.option("--limit", default=5, show_default=True, help="Relations per concept.")
@click.option("--concurrency", default=None, type=int)
@click.option("--timeout", default=None, type=float)
@click.pass_context
def fetch_knowledge(ctx, dataset, base_url, cache_dir, fixture_dir, limit, concurrency, timeout):
    """Retrieve top-k relations for every concept of every record."""
    config = ctx.obj["config"]
    client = ConceptNetClient(
        base_url=_pick(base_url, config, "base_url", None),
        cache_dir=_pick(cache_dir, config, "cache_dir", None),
        fixture_dir=_pick(fixture_dir, config, "fixture_dir", None),
        timeout=_pick(timeout, config, "timeout", 10.0),
        concurrency=_pick(concurrency, config, "concurrency", 4),
    )
    records = _load(dataset)
    fetched = 0
    for i, record in enumerate(records):
        if record.retrieved_knowledge.size() > 0:
            continue  # idempotent re-run: keep what a previous pass fetched
        try:
            bundle = client.build_bundle(record.concept_set, limit=limit)
        except KnowledgeGraphError as exc:
            _fail(f"record {record.id}: {exc}", EXIT_BACKEND)
        filtered = (
            ablation.apply_filter(bundle, record.decisions)
            if record.decisions
            else bundle
        )
        records[i] = replace(record, retrieved_knowledge=bundle, filtered_knowledge=filtered)
        fetched += 1
    _save(records, dataset)
    click.echo(f"fetched knowledge for {fetched} records ({len(records) - fetched} already done)")


@main.command("build-prompts")
@click.option("-d", "--dataset", required=True)
@click.option("--condition", type=click.Choice(sorted(_CONDITIONS)), required=True)
@click.option("-o", "--output", required=True, help="Prompt file, one prompt per line.")
@click.option("--template", "template_path", default=None, help="Prompt template JSON.")
def build_prompts(dataset, condition, output, template_path):
    """Emit the exact prompts generation would use (golden output)."""
    records = _load(dataset)
    template = _template(template_path)
    cond = _CONDITIONS[condition]
    lines = []
    for record in records:
        bundle = _bundle_for(record, cond)
        lines.append(build_prompt(record.concept_set, bundle, template))
    Path(output).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    click.echo(f"wrote {len(lines)} prompts -> {output}")


def _bundle_for(record, condition: GenerationCondition) -> KnowledgeBundle | None:
    if condition == GenerationCondition.NO_KNOWLEDGE:
        return None
    if condition == GenerationCondition.FULL_KNOWLEDGE:
        return record.retrieved_knowledge
    # Filtered prompts renumber ranks so the model sees a clean 0..k-1 list.
    return ablation.renumber_bundle(record.filtered_knowledge)


@main.command("generate")
@click.option("-d", "--dataset", required=True)
@click.option("--condition", type=click.Choice(sorted(_CONDITIONS)), required=True)
@click.option("--backend", "backend_kind", type=click.Choice(["stub", "http", "subprocess"]), default=None)
@click.option("--endpoint", default=None, help="Completion endpoint URL (http backend).")
@click.option("--command", default=None, help="Command line (subprocess backend).")
@click.option("--model", default=None)
@click.option("--temperature", default=None, type=float)
@click.option("--max-tokens", default=None, type=int)
@click.option("--seed", default=None, type=int, help="Sampling seed forwarded to the backend.")
@click.option("--timeout", default=None, type=float)
@click.option("--concurrency", default=None, type=int)
@click.option("--template", "template_path", default=None)
@click.option("--force", is_flag=True, help="Generate filtered sentences before all decisions exist.")
@click.pass_context
def generate_cmd(
    ctx,
    dataset,
    condition,
    backend_kind,
    endpoint,
    command,
    model,
    temperature,
    max_tokens,
    seed,
    timeout,
    concurrency,
    template_path,
    force,
):
    """Generate one sentence per record under the chosen condition."""
    config = ctx.obj["config"]
    records = _load(dataset)
    cond = _CONDITIONS[condition]
    template = _template(_pick(template_path, config, "template", None))

    if cond == GenerationCondition.FILTERED_KNOWLEDGE and not force:
        undecided = [r.id for r in records if not _decisions_complete(r)]
        if undecided:
            _fail(
                "filter decisions missing for records "
                f"{', '.join(undecided[:5])}{'...' if len(undecided) > 5 else ''} "
                "(use --force to override)",
                EXIT_USER,
            )

    kind = _pick(backend_kind, config, "backend", "stub")
    if kind == "stub":
        backend = stub_backend()
    elif kind == "http":
        ep = _pick(endpoint, config, "endpoint", None)
        if not ep:
            _fail("http backend needs --endpoint", EXIT_USER)
        backend = http_backend(
            ep,
            model=_pick(model, config, "model", ""),
            temperature=_pick(temperature, config, "temperature", 0.0),
            max_tokens=_pick(max_tokens, config, "max_tokens", 64),
            seed=seed,
            timeout=_pick(timeout, config, "timeout", 30.0),
        )
    else:
        cmd = _pick(command, config, "command", None)
        if not cmd:
            _fail("subprocess backend needs --command", EXIT_USER)
        backend = subprocess_backend(cmd, timeout=_pick(timeout, config, "timeout", 30.0))

    inputs = [(r.concept_set, _bundle_for(r, cond)) for r in records]
    try:
        result = generate_batch(
            inputs,
            cond,
            backend,
            template,
            concurrency=_pick(concurrency, config, "concurrency", 4),
        )
    except (ValueError, GenerationError) as exc:
        _fail(str(exc), EXIT_USER)

    field = {
        GenerationCondition.NO_KNOWLEDGE: "sentence_none",
        GenerationCondition.FULL_KNOWLEDGE: "sentence_full",
        GenerationCondition.FILTERED_KNOWLEDGE: "sentence_filtered",
    }[cond]
    for i, sentence in enumerate(result.sentences):
        if sentence is not None:
            records[i] = replace(records[i], **{field: sentence})
    _save(records, dataset)
    click.echo(f"generated {result.success_count()}/{len(records)} sentences ({condition})")
    for failure in result.failures:
        click.echo(f"failed {failure.concept_set_id}: {failure.error}", err=True)
    if result.failures:
        sys.exit(EXIT_BACKEND)


def _decisions_complete(record) -> bool:
    decided = set(resolve_decisions(record.decisions))
    return record.retrieved_knowledge.relation_ids() <= decided


@main.command("suggest-filters")
@click.option("-d", "--dataset", required=True)
@click.option("-o", "--output", default=None, help="Suggestions file (JSON lines).")
def suggest_filters(dataset, output):
    """List mechanically justified removal candidates per record."""
    records = _load(dataset)
    lines = []
    total = 0
    for record in records:
        suggestions = ablation.suggest_removals(record.concept_set, record.retrieved_knowledge)
        total += len(suggestions)
        for s in suggestions:
            lines.append(
                json.dumps(
                    {
                        "record_id": record.id,
                        "relation_id": s.relation_id,
                        "reason": s.reason.value,
                        "evidence": s.evidence,
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
    if output:
        Path(output).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    else:
        for line in lines:
            click.echo(line)
    click.echo(f"{total} suggestions across {len(records)} records", err=output is None)


@main.command("serve")
@click.option("-d", "--dataset", required=True)
@click.option("--data-dir", default=None, help="Event log directory (KITGI_DATA_DIR).")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--ui-dir", default=None, help="Static web UI bundle to mount at /.")
@click.option("--lease-seconds", default=None, type=float)
@click.pass_context
def serve(ctx, dataset, data_dir, host, port, ui_dir, lease_seconds):
    """Run the annotation service over the dataset."""
    import uvicorn

    from .service import TaskStore, create_app

    config = ctx.obj["config"]
    records = _load(dataset)
    store = TaskStore(
        records,
        data_dir=_pick(data_dir, config, "data_dir", os.environ.get("KITGI_DATA_DIR", "kitgi-data")),
        lease_seconds=_pick(lease_seconds, config, "lease_seconds", 900.0),
    )
    app = create_app(store, ui_dir=_pick(ui_dir, config, "ui_dir", None))
    uvicorn.run(
        app,
        host=_pick(host, config, "host", "127.0.0.1"),
        port=_pick(port, config, "port", 8100),
    )


@main.command("report")
@click.option("-d", "--dataset", required=True)
@click.option("-o", "--out-dir", required=True)
def report(dataset, out_dir):
    """Write distribution tables, matrices, and the summary document."""
    records = _load(dataset)
    try:
        evalstats.emit_report(records, out_dir)
    except ablation.EmptyCorpusError as exc:
        _fail(str(exc), EXIT_USER)
    except OSError as exc:
        _fail(f"cannot write reports: {exc}", EXIT_BACKEND)
    accounting = evalstats.relation_accounting(records)
    click.echo(f"records: {len(records)}")
    click.echo(f"retrieved relations: {accounting['retrieved']}")
    click.echo(f"removed relations: {accounting['removed']}")
    click.echo(f"remaining relations: {accounting['remaining']}")
    summary = json.loads((Path(out_dir) / "summary.json").read_text(encoding="utf-8"))
    for name in ("matrix_full", "matrix_filtered"):
        section = summary.get(name)
        if section:
            rates = section["rates"]
            click.echo(
                f"{name}: cells={section['cells']} both_correct={rates['both_correct']}% "
                f"coverage_fail={rates['coverage_fail']}%"
            )
    click.echo(f"reports -> {out_dir}")


@main.command("export-kitgi")
@click.option("-d", "--dataset", required=True)
@click.option("-o", "--output", required=True)
def export_kitgi(dataset, output):
    """Export validation-clean records in the dataset schema."""
    records = _load(dataset)
    valid = []
    bad = 0
    for record in records:
        violations = validate_record(record)
        if violations:
            bad += 1
            for v in violations:
                click.echo(f"invalid {record.id}: {v}", err=True)
        else:
            valid.append(record)
    Path(output).write_text(
        "".join(record_to_line(r) + "\n" for r in valid), encoding="utf-8"
    )
    click.echo(f"exported {len(valid)} records -> {output} ({bad} invalid skipped)")
    if bad:
        sys.exit(EXIT_USER)


@main.command("select-improved")
@click.option("-d", "--dataset", required=True)
@click.option("-o", "--output", default=None)
def select_improved(dataset, output):
    """Ids of records that became plausible once knowledge was added."""
    records = _load(dataset)
    try:
        ids = evalstats.select_improved(records)
    except evalstats.MissingAnnotationError as exc:
        _fail(str(exc), EXIT_USER)
    if output:
        Path(output).write_text("".join(i + "\n" for i in ids), encoding="utf-8")
    else:
        for record_id in ids:
            click.echo(record_id)
    click.echo(f"{len(ids)} improved records", err=output is None)


@main.command("stem-rules")
def stem_rules():
    """Print the coverage stemmer's rule table for audit."""
    click.echo(format_rule_table())


if __name__ == "__main__":
    main()
