"""Uniform interface over text-generation backends, plus batch driving.

The HTTP backend speaks a minimal completion wire shape (``model``,
``prompt``, ``max_tokens``, ``temperature`` in; ``text`` out, with an
OpenAI-style ``choices[0].text`` fallback) so any local inference server
works. The stub backend is a pure function of the prompt and stamps a fixed
timestamp, which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import requests

from .model import (
    ConceptSet,
    EPOCH,
    GeneratedSentence,
    GenerationCondition,
    KnowledgeBundle,
    utc_now,
)
from .prompting import DEFAULT_TEMPLATE, PromptTemplate, build_prompt


class GenerationError(Exception):
    pass


class BackendFailed(GenerationError):
    pass


class BackendTimeout(GenerationError):
    pass


class EmptyCompletion(GenerationError):
    pass


class BackendKind(Enum):
    HTTP_COMPLETION = "HttpCompletion"
    SUBPROCESS = "Subprocess"
    STUB = "Stub"


@dataclass(frozen=True)
class GeneratorBackend:
    kind: BackendKind
    endpoint_or_command: str = ""
    decode_params: dict[str, str] = field(default_factory=dict)
    timeout: float = 30.0

    @property
    def backend_id(self) -> str:
        if self.kind == BackendKind.STUB:
            return "stub"
        prefix = "http" if self.kind == BackendKind.HTTP_COMPLETION else "subprocess"
        return f"{prefix}:{self.endpoint_or_command}"


def stub_backend() -> GeneratorBackend:
    return GeneratorBackend(kind=BackendKind.STUB, decode_params={"temperature": "0.0"})


def http_backend(
    endpoint: str,
    model: str = "",
    temperature: float = 0.0,
    max_tokens: int = 64,
    seed: int | None = None,
    timeout: float = 30.0,
) -> GeneratorBackend:
    params = {
        "model": model,
        "temperature": str(temperature),
        "max_tokens": str(max_tokens),
    }
    if seed is not None:
        params["seed"] = str(seed)
    return GeneratorBackend(
        kind=BackendKind.HTTP_COMPLETION,
        endpoint_or_command=endpoint,
        decode_params=params,
        timeout=timeout,
    )


def subprocess_backend(command: str, timeout: float = 30.0) -> GeneratorBackend:
    return GeneratorBackend(
        kind=BackendKind.SUBPROCESS, endpoint_or_command=command, timeout=timeout
    )


def _first_line(text: str) -> str:
    return text.strip().splitlines()[0].strip() if text.strip() else ""


def _stub_complete(prompt: str) -> str:
    """Deterministic echo: join the prompt's concept tokens into a sentence."""
    text = prompt.split(":", 1)[1] if ":" in prompt else prompt
    cut = text.find(" relations are:")
    if cut >= 0:
        tokens = text[:cut].split()
        tokens = tokens[:-1]  # the token before the header is that header's concept
    else:
        tokens = text.split()
    return "a " + " ".join(tokens) + "." if tokens else ""


def _http_complete(prompt: str, backend: GeneratorBackend) -> str:
    payload = {
        "model": backend.decode_params.get("model", ""),
        "prompt": prompt,
        "max_tokens": int(backend.decode_params.get("max_tokens", "64")),
        "temperature": float(backend.decode_params.get("temperature", "0.0")),
    }
    try:
        response = requests.post(
            backend.endpoint_or_command, json=payload, timeout=backend.timeout
        )
    except requests.Timeout as exc:
        raise BackendTimeout(f"completion request timed out: {exc}") from exc
    except requests.RequestException as exc:
        raise BackendFailed(f"completion request failed: {exc}") from exc
    if response.status_code != 200:
        raise BackendFailed(
            f"completion endpoint returned {response.status_code}: {response.text[:200]}"
        )
    data = response.json()
    if "text" in data:
        return data["text"]
    choices = data.get("choices")
    if choices and isinstance(choices, list) and "text" in choices[0]:
        return choices[0]["text"]
    raise BackendFailed(f"completion response carries no text field: {data!r:.200}")


def _subprocess_complete(prompt: str, backend: GeneratorBackend) -> str:
    argv = shlex.split(backend.endpoint_or_command)
    try:
        proc = subprocess.run(
            argv,
            input=prompt,
            capture_output=True,
            text=True,
            timeout=backend.timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise BackendTimeout(f"backend command timed out after {backend.timeout}s") from exc
    except OSError as exc:
        raise BackendFailed(f"backend command failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise BackendFailed(
            f"backend command exited {proc.returncode}: "
            f"stdout={proc.stdout[:200]!r} stderr={proc.stderr[:200]!r}"
        )
    return proc.stdout


def generate(
    prompt: str,
    backend: GeneratorBackend,
    condition: GenerationCondition = GenerationCondition.NO_KNOWLEDGE,
    extra_params: dict[str, str] | None = None,
) -> GeneratedSentence:
    """Run one completion; returns the first line of the backend's output."""
    if backend.kind == BackendKind.STUB:
        raw = _stub_complete(prompt)
    elif backend.kind == BackendKind.HTTP_COMPLETION:
        raw = _http_complete(prompt, backend)
    else:
        raw = _subprocess_complete(prompt, backend)
    text = _first_line(raw)
    if not text:
        raise EmptyCompletion("backend produced an empty completion")
    params = dict(backend.decode_params)
    if extra_params:
        params.update(extra_params)
    return GeneratedSentence(
        text=text,
        condition=condition,
        backend_id=backend.backend_id,
        decode_params=params,
        created_at=EPOCH if backend.kind == BackendKind.STUB else utc_now(),
    )


@dataclass(frozen=True)
class BatchFailure:
    index: int
    concept_set_id: str
    error: str


@dataclass
class BatchResult:
    """Sentences aligned with the inputs (None where a record failed)."""

    sentences: list[GeneratedSentence | None]
    failures: list[BatchFailure]

    def success_count(self) -> int:
        return sum(1 for s in self.sentences if s is not None)


def generate_batch(
    inputs: list[tuple[ConceptSet, KnowledgeBundle | None]],
    condition: GenerationCondition,
    backend: GeneratorBackend,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    concurrency: int = 4,
) -> BatchResult:
    """Generate one sentence per input; per-record failures never abort the batch."""
    if condition != GenerationCondition.NO_KNOWLEDGE:
        missing = [cs.id for cs, bundle in inputs if bundle is None]
        if missing:
            raise ValueError(
                f"condition {condition.value} requires a knowledge bundle for every "
                f"record; missing for: {', '.join(missing)}"
            )

    template_note = {"template": template.compact()}
    sentences: list[GeneratedSentence | None] = [None] * len(inputs)
    failures: list[BatchFailure] = []

    def run_one(index: int) -> None:
        concept_set, bundle = inputs[index]
        prompt = build_prompt(
            concept_set,
            bundle if condition != GenerationCondition.NO_KNOWLEDGE else None,
            template,
        )
        try:
            sentences[index] = generate(prompt, backend, condition, template_note)
        except GenerationError as exc:
            failures.append(BatchFailure(index, concept_set.id, str(exc)))

    if backend.kind == BackendKind.STUB or concurrency <= 1:
        for i in range(len(inputs)):
            run_one(i)
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            list(pool.map(run_one, range(len(inputs))))
    failures.sort(key=lambda f: f.index)
    return BatchResult(sentences=sentences, failures=failures)
