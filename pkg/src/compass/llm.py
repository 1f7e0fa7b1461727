"""Completion gateway over an HTTP chat backend or an offline mock fixture table."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol

import httpx

from .errors import (
    BackendError,
    BackendUnavailable,
    BudgetExceeded,
    FixtureMiss,
    SchemaMismatch,
    TransientBackendError,
    UnparseableOutput,
)
from .knowledge_tree import PromptBundle, estimate_tokens

log = logging.getLogger(__name__)

LLM_KEY_ENV = "COMPASS_LLM_KEY"
MISS_ERROR = "error"
MISS_ECHO_SCHEMA = "echo-schema-default"


@dataclass(frozen=True)
class CompletionRequest:
    bundle: PromptBundle
    max_output_tokens: int = 512
    temperature: float = 0.0
    request_tag: str = ""


@dataclass(frozen=True)
class Completion:
    text: str
    backend_id: str
    latency_ms: float
    attempt_count: int


def prompt_digest(bundle: PromptBundle) -> str:
    """Stable content hash of (system_text, user_text)."""
    h = hashlib.sha256()
    h.update(bundle.system_text.encode("utf-8"))
    h.update(b"\x00")
    h.update(bundle.user_text.encode("utf-8"))
    return h.hexdigest()


class Backend(Protocol):
    backend_id: str

    def send(self, request: CompletionRequest) -> str: ...


@dataclass
class MockFixtureTable:
    entries: dict[str, str] = field(default_factory=dict)
    miss_policy: str = MISS_ERROR

    @classmethod
    def load(cls, path: str | Path, miss_policy: str = MISS_ERROR) -> MockFixtureTable:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "entries" in raw and isinstance(raw["entries"], dict):
            return cls(dict(raw["entries"]), raw.get("miss_policy", miss_policy))
        return cls(dict(raw), miss_policy)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(dict(sorted(self.entries.items())), indent=1,
                                         ensure_ascii=False) + "\n", encoding="utf-8")


class MockBackend:
    """Looks responses up by prompt digest; read-only after construction."""

    backend_id = "mock"

    def __init__(self, table: MockFixtureTable):
        self.table = table

    def send(self, request: CompletionRequest) -> str:
        digest = prompt_digest(request.bundle)
        try:
            return self.table.entries[digest]
        except KeyError:
            if self.table.miss_policy == MISS_ECHO_SCHEMA:
                return request.bundle.output_schema_hint
            raise FixtureMiss(digest) from None


class FaultInjectingBackend:
    """Fails the first request for every distinct prompt, then delegates.

    ``mode="garbage"`` returns unparseable text (a step-level failure the
    rollback controller sees); ``mode="transient"`` raises a retryable error
    absorbed by the gateway's own retry loop.
    """

    def __init__(self, inner: Backend, mode: str = "garbage"):
        if mode not in ("garbage", "transient"):
            raise ValueError(mode)
        self.inner = inner
        self.mode = mode
        self.backend_id = f"{inner.backend_id}+faults"
        self._seen: set[str] = set()
        self._lock = threading.Lock()
        self.injected = 0

    def send(self, request: CompletionRequest) -> str:
        digest = prompt_digest(request.bundle)
        with self._lock:
            first = digest not in self._seen
            self._seen.add(digest)
            if first:
                self.injected += 1
        if first:
            if self.mode == "transient":
                raise TransientBackendError(f"injected fault for {digest[:12]}")
            return "<<injected fault: output truncated>>"
        return self.inner.send(request)


class HttpBackend:
    """OpenAI-style chat-completions endpoint."""

    backend_id = "http"

    def __init__(self, url: str, model: str, api_key: str | None = None,
                 client: httpx.Client | None = None, timeout_s: float = 120.0):
        self.url = url
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(LLM_KEY_ENV)
        self.client = client or httpx.Client(timeout=timeout_s)

    def send(self, request: CompletionRequest) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "system", "content": request.bundle.system_text},
                         {"role": "user", "content": request.bundle.user_text}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = self.client.post(self.url, json=body, headers=headers)
        except httpx.TransportError as exc:
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransientBackendError(f"malformed backend response: {exc!r}") from exc


class Gateway:
    """Uniform ``complete`` with retries, backoff and a cap on in-flight requests."""

    def __init__(self, backend: Backend, max_attempts: int = 3, max_parallel: int = 4,
                 token_budget: int | None = None, backoff_s: float = 0.5,
                 max_backoff_s: float = 8.0, sleep=time.sleep):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.backend = backend
        self.max_attempts = max_attempts
        self.token_budget = token_budget
        self.backoff_s = backoff_s
        self.max_backoff_s = max_backoff_s
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_parallel)

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_s * 2 ** (attempt - 1), self.max_backoff_s)

    def complete(self, request: CompletionRequest) -> Completion:
        if self.token_budget is not None:
            need = (estimate_tokens(request.bundle.system_text)
                    + estimate_tokens(request.bundle.user_text) + request.max_output_tokens)
            if need > self.token_budget:
                raise BudgetExceeded(f"request needs ~{need} tokens, budget {self.token_budget}")
        with self._slots:
            last: BackendError | None = None
            for attempt in range(1, self.max_attempts + 1):
                t0 = time.perf_counter()
                try:
                    text = self.backend.send(request)
                except TransientBackendError as exc:
                    last = exc
                    log.warning("backend %s attempt %d failed (%s) tag=%s",
                                self.backend.backend_id, attempt, exc, request.request_tag)
                    if attempt < self.max_attempts:
                        self._sleep(self.backoff(attempt))
                    continue
                latency = (time.perf_counter() - t0) * 1000.0
                return Completion(text, self.backend.backend_id, latency, attempt)
        raise BackendUnavailable(f"{self.backend.backend_id}: gave up after "
                                 f"{self.max_attempts} attempts ({last})")


# -- structured output ------------------------------------------------------


@dataclass(frozen=True)
class Shape:
    name: str
    required: Mapping[str, Any]
    optional: Mapping[str, Any] = field(default_factory=dict)


NUMBER = "number"

LABEL = Shape("label", {"label": str}, {"rationale": str})
HEADER_MAPPINGS = Shape("mapping", {"mappings": list})
EXTRACTION_PLAN = Shape("mapping", {"columns": list}, {"phase": str})
CONVERSION = Shape("mapping", {"to_unit": str, "from_dimension": str, "factor": NUMBER},
                   {"from_unit": str, "offset": NUMBER, "kind": str})
RECORD_LIST = Shape("record-list", {"records": list})

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.S)


def _type_ok(value, expected) -> bool:
    if expected == NUMBER:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, expected)


def _loads_repaired(text: str):
    try:
        return json.loads(text)
    except ValueError:
        pass
    # single repair pass: drop code fences, then skip prose around the JSON body
    m = _FENCE.search(text)
    body = m.group(1) if m else text
    starts = [i for i in (body.find("{"), body.find("[")) if i >= 0]
    if not starts:
        raise UnparseableOutput(f"no JSON object in output: {text[:80]!r}")
    try:
        value, _ = json.JSONDecoder().raw_decode(body[min(starts):])
        return value
    except ValueError as exc:
        raise UnparseableOutput(f"{exc}: {text[:80]!r}") from None


def parse_structured(completion: Completion | str, expected_shape: Shape) -> dict[str, Any]:
    text = completion.text if isinstance(completion, Completion) else completion
    value = _loads_repaired(text.strip())
    if not isinstance(value, dict):
        raise SchemaMismatch(list(expected_shape.required),
                             f"{expected_shape.name}: expected a JSON object")
    missing = [k for k in expected_shape.required if k not in value]
    if missing:
        raise SchemaMismatch(missing)
    wrong = [k for k, t in expected_shape.required.items() if not _type_ok(value[k], t)]
    wrong += [k for k, t in expected_shape.optional.items()
              if value.get(k) is not None and not _type_ok(value[k], t)]
    if wrong:
        raise SchemaMismatch([], f"{expected_shape.name}: wrong type for {', '.join(wrong)}")
    return value
