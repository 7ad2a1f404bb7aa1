"""Concept-coverage checking for generated sentences.

A concept counts as covered when the sentence contains it verbatim or in an
inflected form that a small rule-based stemmer maps to the same stem.
Derivational forms (e.g. "runner" for "run") are deliberately out of scope;
those cases go to the human override in the annotation service.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import Concept, ConceptSet

_TOKEN_RE = re.compile(r"[a-z]+")
_VOWELS = "aeiou"

# Audit table printed by `kitgi stem-rules`; each row is covered by a golden
# test. Order matters: rules apply as a pipeline, top to bottom.
RULE_TABLE: list[tuple[str, str, str]] = [
    ("ies->y", 'words of 5+ letters ending "ies" swap the suffix for "y"', "parties -> party"),
    ("eed->ee", 'words of 5+ letters ending "eed" drop one "d" when a vowel precedes', "agreed -> agree"),
    (
        "es",
        'words of 5+ letters ending "es" (not "ees") drop it; a silent "e" is restored '
        'unless the stem ends in a sibilant (ss, x, z, ch, sh)',
        "races -> race, boxes -> box",
    ),
    ("s", 'words of 4+ letters ending "s" (not "ss", "us", "is") drop it', "dogs -> dog"),
    (
        "ing",
        'words of 5+ letters ending "ing" drop it when a vowel remains; a doubled final '
        'consonant (except l, s, z) is undoubled, otherwise a silent "e" is restored after '
        "a consonant-vowel-consonant ending (final consonant not w, x, y)",
        "running -> run, racing -> race, looking -> look",
    ),
    (
        "ed",
        'words of 5+ letters ending "ed" (not "eed") drop it under the same undoubling '
        "and silent-e rules",
        "stopped -> stop, raced -> race",
    ),
]


def _is_vowel(ch: str) -> bool:
    return ch in _VOWELS


def _has_vowel(word: str) -> bool:
    return any(ch in _VOWELS or ch == "y" for ch in word)


def _ends_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and not _is_vowel(word[-1])


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    last, mid, first = word[-1], word[-2], word[-3]
    return not _is_vowel(last) and last not in "wxy" and _is_vowel(mid) and not _is_vowel(first)


def _strip_participle(stem: str) -> str:
    """Undouble or restore a silent e after removing "ing"/"ed"."""
    if _ends_double_consonant(stem) and stem[-1] not in "lsz":
        return stem[:-1]
    if _ends_cvc(stem):
        return stem + "e"
    return stem


def stem(word: str) -> str:
    """Light suffix stemmer; idempotent over ASCII words."""
    w = word.lower()
    if len(w) >= 5 and w.endswith("ies"):
        w = w[:-3] + "y"
    if len(w) >= 5 and w.endswith("eed") and _has_vowel(w[:-3]):
        w = w[:-1]
    if len(w) >= 5 and w.endswith("es") and not w.endswith("ees"):
        t = w[:-2]
        if t.endswith(("ss", "x", "z", "ch", "sh")):
            w = t
        else:
            w = t + "e"
    if len(w) >= 4 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        w = w[:-1]
    if len(w) >= 5 and w.endswith("ing") and _has_vowel(w[:-3]):
        w = _strip_participle(w[:-3])
    if len(w) >= 5 and w.endswith("ed") and not w.endswith("eed") and _has_vowel(w[:-2]):
        w = _strip_participle(w[:-2])
    return w


def tokenize(sentence: str) -> list[str]:
    """Lowercased letter runs; hyphens and other non-letters split tokens."""
    return _TOKEN_RE.findall(sentence.lower())


@dataclass
class CoverageResult:
    covered: list[Concept]
    missing: list[Concept]
    bit: int
    matches: dict[Concept, str]


def _match_single(surface: str, tokens: list[str], stems: list[str]) -> str | None:
    target = stem(surface)
    for token, token_stem in zip(tokens, stems):
        if token == surface or token_stem == target:
            return token
    return None


def _match_multiword(words: list[str], tokens: list[str], stems: list[str]) -> str | None:
    targets = [stem(w) for w in words]
    n = len(words)
    for i in range(len(tokens) - n + 1):
        window = tokens[i : i + n]
        window_stems = stems[i : i + n]
        if all(
            window[j] == words[j] or window_stems[j] == targets[j] for j in range(n)
        ):
            return " ".join(window)
    return None


def check_coverage(sentence: str, concept_set: ConceptSet) -> CoverageResult:
    """Decide per concept whether the sentence contains it.

    Multiword concepts require their words adjacent and in order. The exact
    surface as a token always counts, independent of the stemmer.
    """
    tokens = tokenize(sentence)
    stems = [stem(t) for t in tokens]
    covered: list[Concept] = []
    missing: list[Concept] = []
    matches: dict[Concept, str] = {}
    for concept in concept_set.concepts:
        words = concept.words()
        if len(words) == 1:
            hit = _match_single(concept.surface, tokens, stems)
        else:
            hit = _match_multiword(words, tokens, stems)
        if hit is None:
            missing.append(concept)
        else:
            covered.append(concept)
            matches[concept] = hit
    return CoverageResult(
        covered=covered,
        missing=missing,
        bit=1 if not missing else 0,
        matches=matches,
    )


def format_rule_table() -> str:
    lines = ["Stemmer rule table (applied top to bottom as a pipeline):"]
    for name, description, example in RULE_TABLE:
        lines.append(f"  {name:10s} {description}")
        lines.append(f"  {'':10s} example: {example}")
    return "\n".join(lines)
