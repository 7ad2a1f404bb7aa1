"""Prompt construction and the inverse parser for the knowledge text block.

Rendering follows the dataset's textual shape, e.g.::

    look relations are: 0. RelatedTo see. 1. RelatedTo glance.

Multiword terms are stored with underscores and rendered with spaces; the
parser maps spaces back to underscores, so render/parse round-trips exactly
up to edge weights (the text carries none).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .model import Concept, ConceptSet, KnowledgeBundle, Relation, RelationType

# Weight placeholder for relations recovered from text, which carries none.
UNKNOWN_WEIGHT = 0.0

_SENTINEL = ""


class PromptError(Exception):
    pass


class ForeignConceptError(PromptError):
    pass


class MalformedKnowledgeText(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    task_prefix: str = "generate a sentence with:"
    concept_join: str = " "
    knowledge_header: str = "{concept} relations are:"
    relation_line: str = "{rank}. {rel_type} {tail}."

    def __post_init__(self) -> None:
        if "{concept}" not in self.knowledge_header:
            raise ValueError("knowledge_header must contain {concept}")
        for ph in ("{rank}", "{rel_type}", "{tail}"):
            if ph not in self.relation_line:
                raise ValueError(f"relation_line must contain {ph}")
        if not self.relation_line.startswith("{rank}"):
            raise ValueError("relation_line must start with {rank}")
        if self.relation_line.endswith("{tail}"):
            raise ValueError("relation_line needs a literal terminator after {tail}")

    def entry_terminator(self) -> str:
        """Final literal of the relation line; bounds blocks when parsing."""
        return self.relation_line[-1]

    def header_phrase(self) -> str:
        """The header's literal part, used for escaping inside terms."""
        return self.knowledge_header.replace("{concept}", "").strip()

    def compact(self) -> str:
        return json.dumps(
            {
                "task_prefix": self.task_prefix,
                "concept_join": self.concept_join,
                "knowledge_header": self.knowledge_header,
                "relation_line": self.relation_line,
            },
            ensure_ascii=False,
            separators=(",", ":"),
        )


DEFAULT_TEMPLATE = PromptTemplate()


def load_template(path: str | Path) -> PromptTemplate:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    defaults = PromptTemplate()
    return PromptTemplate(
        task_prefix=data.get("task_prefix", defaults.task_prefix),
        concept_join=data.get("concept_join", defaults.concept_join),
        knowledge_header=data.get("knowledge_header", defaults.knowledge_header),
        relation_line=data.get("relation_line", defaults.relation_line),
    )


def _escape_term(display: str, phrase: str) -> str:
    if phrase and phrase in display:
        escaped = phrase[:-1] + "\\" + phrase[-1]
        return display.replace(phrase, escaped)
    return display


def _unescape_term(text: str, phrase: str) -> str:
    if phrase:
        escaped = phrase[:-1] + "\\" + phrase[-1]
        return text.replace(escaped, phrase)
    return text


def render_knowledge(bundle: KnowledgeBundle, template: PromptTemplate = DEFAULT_TEMPLATE) -> str:
    """Emit the knowledge text block; empty bundle renders to ""."""
    phrase = template.header_phrase()
    parts: list[str] = []
    for concept, relations in bundle.per_concept.items():
        parts.append(
            template.knowledge_header.format(concept=_escape_term(concept.display(), phrase))
        )
        for rel in relations:
            tail_display = _escape_term(rel.tail.replace("_", " "), phrase)
            parts.append(
                template.relation_line.format(
                    rank=rel.rank, rel_type=rel.rel_type.label, tail=tail_display
                )
            )
    return " ".join(parts)


def build_prompt(
    concept_set: ConceptSet,
    bundle: KnowledgeBundle | None = None,
    template: PromptTemplate = DEFAULT_TEMPLATE,
) -> str:
    """Task prefix, then the concept list, then the rendered knowledge."""
    if bundle is not None:
        surfaces = set(concept_set.surfaces())
        for concept in bundle.per_concept:
            if concept.surface not in surfaces:
                raise ForeignConceptError(
                    f"bundle concept {concept.surface!r} is not in the concept set"
                )
    concepts_text = template.concept_join.join(c.display() for c in concept_set.concepts)
    parts = [template.task_prefix, concepts_text]
    if bundle is not None:
        rendered = render_knowledge(bundle, template)
        if rendered:
            parts.append(rendered)
    return " ".join(p for p in parts if p).strip()


def _header_regex(template: PromptTemplate) -> re.Pattern:
    # A concept never spans an entry terminator, which keeps headers from
    # swallowing the preceding block's entries.
    concept_pattern = r"(?P<concept>[^" + re.escape(template.entry_terminator()) + r"]+?)"
    pattern = re.escape(template.knowledge_header)
    pattern = pattern.replace(re.escape("{concept}"), concept_pattern)
    return re.compile(pattern)


def _entry_regex(template: PromptTemplate) -> re.Pattern:
    pattern = re.escape(template.relation_line)
    pattern = pattern.replace(re.escape("{rank}"), r"(?P<rank>\d+)")
    pattern = pattern.replace(re.escape("{rel_type}"), r"(?P<rel_type>[A-Za-z][A-Za-z0-9_/]*)")
    pattern = pattern.replace(re.escape("{tail}"), r"(?P<tail>.+)")
    return re.compile(pattern)


def _entry_splitter(template: PromptTemplate) -> re.Pattern:
    after_rank = template.relation_line[len("{rank}") :]
    first_literal = after_rank[0] if after_rank else "."
    return re.compile(r"\s+(?=\d+" + re.escape(first_literal) + ")")


def parse_relations(text: str, template: PromptTemplate = DEFAULT_TEMPLATE) -> KnowledgeBundle:
    """Inverse of :func:`render_knowledge`, up to weights.

    Parsed relations carry ``weight = UNKNOWN_WEIGHT`` and take their ranks
    from the numbering in the text.
    """
    if not text.strip():
        return KnowledgeBundle({})
    phrase = template.header_phrase()
    escaped_phrase = phrase[:-1] + "\\" + phrase[-1] if phrase else ""
    protected = text.replace(escaped_phrase, _SENTINEL) if escaped_phrase else text

    header_re = _header_regex(template)
    headers = list(header_re.finditer(protected))
    if not headers:
        raise MalformedKnowledgeText(f"no knowledge header found in: {text.strip()!r}")
    if protected[: headers[0].start()].strip():
        raise MalformedKnowledgeText(
            f"unparseable text before first header: {protected[: headers[0].start()].strip()!r}"
        )

    entry_re = _entry_regex(template)
    splitter = _entry_splitter(template)
    per_concept: dict[Concept, tuple[Relation, ...]] = {}
    for i, match in enumerate(headers):
        raw_concept = match.group("concept").strip()
        surface = _unprotect(raw_concept, phrase).replace(" ", "_")
        concept = Concept(surface)
        end = headers[i + 1].start() if i + 1 < len(headers) else len(protected)
        block = protected[match.end() : end].strip()
        relations: list[Relation] = []
        if block:
            for segment in splitter.split(block):
                m = entry_re.fullmatch(segment.strip())
                if not m:
                    raise MalformedKnowledgeText(f"malformed relation entry: {segment.strip()!r}")
                tail = _unprotect(m.group("tail"), phrase).replace(" ", "_")
                relations.append(
                    Relation.build(
                        head=concept,
                        rel_type=RelationType.parse(m.group("rel_type")),
                        tail=tail,
                        weight=UNKNOWN_WEIGHT,
                        rank=int(m.group("rank")),
                    )
                )
        per_concept[concept] = tuple(relations)
    return KnowledgeBundle(per_concept)


def _unprotect(text: str, phrase: str) -> str:
    return text.replace(_SENTINEL, phrase) if phrase else text
