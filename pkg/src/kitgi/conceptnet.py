"""ConceptNet-compatible knowledge-graph client with caching and fixtures.

Relations come back ordered by edge weight descending (ties broken by
relation type, then tail) so top-k ranks are reproducible. A fixture
directory holding files in the cache's serialized shape gives fully offline,
deterministic operation for tests and pipelines.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path

import requests

from .dataset import relation_from_json, relation_to_json
from .model import (
    Concept,
    ConceptSet,
    EPOCH,
    KnowledgeBundle,
    Relation,
    RelationType,
    format_timestamp,
    parse_timestamp,
    utc_now,
)

DEFAULT_BASE_URL = "https://api.conceptnet.io"
BASE_URL_ENV = "CONCEPTNET_BASE_URL"

_URI_RE = re.compile(r"^/c/([a-z][a-z-]*)/([^/]+)(/.*)?$")


class KnowledgeGraphError(Exception):
    def __init__(self, message: str, last_status: int | None = None):
        super().__init__(message)
        self.last_status = last_status


class MalformedUriError(KnowledgeGraphError):
    pass


class ResultSource(Enum):
    LIVE = "Live"
    CACHE = "Cache"
    FIXTURE = "Fixture"


@dataclass(frozen=True)
class KgQueryResult:
    concept: Concept
    relations: tuple[Relation, ...]
    fetched_at: datetime
    source: ResultSource


def normalize_term(raw_node_uri: str) -> str:
    """Extract the bare term from a node URI like ``/c/en/wrist_watch/n``."""
    m = _URI_RE.match(raw_node_uri)
    if not m:
        raise MalformedUriError(f"malformed concept URI: {raw_node_uri!r}")
    return urllib.parse.unquote(m.group(2)).lower()


def _node_lang(raw_node_uri: str) -> str | None:
    m = _URI_RE.match(raw_node_uri)
    return m.group(1) if m else None


class ConceptNetClient:
    """Fetches top-k relations per concept from a ConceptNet 5 style API.

    Lookups hit, in order: the fixture directory (when configured), the
    cache, then the live endpoint. Cache entries never expire; determinism
    beats freshness for experiment reruns.
    """

    def __init__(
        self,
        base_url: str | None = None,
        cache_dir: str | Path | None = None,
        fixture_dir: str | Path | None = None,
        timeout: float = 10.0,
        retries: int = 3,
        backoff: float = 0.5,
        min_request_interval: float = 0.5,
        concurrency: int = 4,
    ):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.fixture_dir = Path(fixture_dir) if fixture_dir else None
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.min_request_interval = min_request_interval
        self.concurrency = max(1, concurrency)
        self._session = requests.Session()
        self._rate_lock = threading.Lock()
        self._next_slot = 0.0
        self._cache_write_lock = threading.Lock()

    # -- public API ---------------------------------------------------------

    def fetch_relations(self, concept: Concept, limit: int = 5) -> KgQueryResult:
        if limit <= 0:
            raise ValueError("limit must be positive")
        if self.fixture_dir is not None:
            return self._read_stored(self.fixture_dir, concept, limit, ResultSource.FIXTURE)
        cached = self._read_cache(concept, limit)
        if cached is not None:
            return cached
        relations = self._fetch_live(concept, limit)
        result = KgQueryResult(
            concept=concept,
            relations=relations,
            fetched_at=utc_now(),
            source=ResultSource.LIVE,
        )
        self._write_cache(result, limit)
        return result

    def build_bundle(self, concept_set: ConceptSet, limit: int = 5) -> KnowledgeBundle:
        """Fetch every concept (concurrently) and assemble in set order."""
        results: dict[str, KgQueryResult] = {}
        errors: dict[str, Exception] = {}

        def fetch(concept: Concept) -> None:
            try:
                results[concept.surface] = self.fetch_relations(concept, limit)
            except Exception as exc:  # propagated below, annotated with concept
                errors[concept.surface] = exc

        workers = min(self.concurrency, len(concept_set.concepts)) or 1
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fetch, concept_set.concepts))
        for concept in concept_set.concepts:
            if concept.surface in errors:
                exc = errors[concept.surface]
                raise KnowledgeGraphError(
                    f"fetching relations for concept {concept.surface!r}: {exc}",
                    last_status=getattr(exc, "last_status", None),
                )
        return KnowledgeBundle(
            {c: results[c.surface].relations for c in concept_set.concepts}
        )

    # -- storage ------------------------------------------------------------

    def _entry_path(self, root: Path, concept: Concept, limit: int) -> Path:
        safe = urllib.parse.quote(concept.surface, safe="")
        return root / f"{safe}__{concept.lang}__{limit}.json"

    def _read_stored(
        self, root: Path, concept: Concept, limit: int, source: ResultSource
    ) -> KgQueryResult:
        path = self._entry_path(root, concept, limit)
        if not path.exists():
            return KgQueryResult(concept=concept, relations=(), fetched_at=EPOCH, source=source)
        data = json.loads(path.read_text(encoding="utf-8"))
        relations = tuple(relation_from_json(r) for r in data["relations"])[:limit]
        return KgQueryResult(
            concept=concept,
            relations=relations,
            fetched_at=parse_timestamp(data["fetched_at"]),
            source=source,
        )

    def _read_cache(self, concept: Concept, limit: int) -> KgQueryResult | None:
        if self.cache_dir is None:
            return None
        path = self._entry_path(self.cache_dir, concept, limit)
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        if data.get("endpoint") != self.base_url:
            return None
        relations = tuple(relation_from_json(r) for r in data["relations"])[:limit]
        return KgQueryResult(
            concept=concept,
            relations=relations,
            fetched_at=parse_timestamp(data["fetched_at"]),
            source=ResultSource.CACHE,
        )

    def _write_cache(self, result: KgQueryResult, limit: int) -> None:
        if self.cache_dir is None:
            return
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        path = self._entry_path(self.cache_dir, result.concept, limit)
        payload = {
            "concept": {"surface": result.concept.surface, "lang": result.concept.lang},
            "limit": limit,
            "endpoint": self.base_url,
            "fetched_at": format_timestamp(result.fetched_at),
            "relations": [relation_to_json(r) for r in result.relations],
        }
        with self._cache_write_lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")
            tmp.replace(path)

    # -- live fetching ------------------------------------------------------

    def _await_rate_slot(self) -> None:
        with self._rate_lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self.min_request_interval
        wait = slot - time.monotonic()
        if wait > 0:
            time.sleep(wait)

    def _fetch_live(self, concept: Concept, limit: int) -> tuple[Relation, ...]:
        term = urllib.parse.quote(concept.surface, safe="")
        url = f"{self.base_url}/c/{concept.lang}/{term}"
        params = {"limit": max(50, limit * 10)}
        last_status: int | None = None
        last_error = "no attempts made"
        for attempt in range(self.retries):
            self._await_rate_slot()
            try:
                response = self._session.get(url, params=params, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                time.sleep(self.backoff * (2**attempt))
                continue
            last_status = response.status_code
            if response.status_code == 404:
                return ()  # absent node: not an error, just no extractable relations
            if response.status_code == 429 or response.status_code >= 500:
                retry_after = response.headers.get("Retry-After")
                try:
                    delay = float(retry_after) if retry_after else self.backoff * (2**attempt)
                except ValueError:
                    delay = self.backoff * (2**attempt)
                last_error = f"status {response.status_code}"
                time.sleep(delay)
                continue
            if response.status_code != 200:
                raise KnowledgeGraphError(
                    f"unexpected status {response.status_code} from {url}",
                    last_status=response.status_code,
                )
            return self._parse_edges(concept, response.json().get("edges", []), limit)
        raise KnowledgeGraphError(
            f"giving up on {url} after {self.retries} attempts: {last_error}",
            last_status=last_status,
        )

    def _parse_edges(self, concept: Concept, edges: list[dict], limit: int) -> tuple[Relation, ...]:
        candidates: list[tuple[float, str, str]] = []
        for edge in edges:
            start_id = edge.get("start", {}).get("@id", "")
            end_id = edge.get("end", {}).get("@id", "")
            if _node_lang(start_id) != concept.lang or _node_lang(end_id) != concept.lang:
                continue
            try:
                start_term = normalize_term(start_id)
                end_term = normalize_term(end_id)
            except MalformedUriError:
                continue
            if start_term == concept.surface:
                tail = end_term
            elif end_term == concept.surface:
                tail = start_term
            else:
                continue
            if tail == concept.surface or not tail:
                continue  # self-loops convey nothing for generation
            label = edge.get("rel", {}).get("label", "")
            if not label:
                continue
            weight = float(edge.get("weight", 1.0))
            candidates.append((weight, label, tail))

        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        seen: set[tuple[str, str]] = set()
        relations: list[Relation] = []
        for weight, label, tail in candidates:
            key = (label, tail)
            if key in seen:
                continue
            seen.add(key)
            relations.append(
                Relation.build(
                    head=concept,
                    rel_type=RelationType(label),
                    tail=tail,
                    weight=weight,
                    rank=len(relations),
                )
            )
            if len(relations) == limit:
                break
        return tuple(relations)
