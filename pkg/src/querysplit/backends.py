"""Generation-backend abstraction.

Any splitter/completer model server satisfies one wire contract:
``POST /v1/generate`` with ``{task, input, max_length, seed, request_id}``
answering ``{output, request_id}``. Local stubs (echo, gold-oracle,
scripted) make pipelines testable without a model in process.
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import requests

from .errors import (
    BackendConnectionError,
    BackendRejectedError,
    BackendServerError,
    BackendTimeout,
    ConfigError,
    MalformedResponseError,
    ScriptExhaustedError,
    UnknownRequestError,
)

TASK_TAGS = ("split", "delete", "complete", "causal_complete", "end_to_end")

DEFAULT_TIMEOUT_S = 10.0
DEFAULT_RETRIES = 2


def _new_request_id() -> str:
    return uuid.uuid4().hex


@dataclass(frozen=True)
class GenerationRequest:
    task: str
    input_text: str
    max_length: int = 128
    seed: Optional[int] = None
    request_id: str = field(default_factory=_new_request_id)

    def __post_init__(self):
        if not self.task:
            raise ValueError("task tag must be non-empty")
        if not self.input_text:
            raise ValueError("input text must be non-empty")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")

    def cache_key(self) -> tuple:
        return (self.task, self.input_text, self.max_length, self.seed)

    def to_wire(self) -> dict:
        return {
            "task": self.task,
            "input": self.input_text,
            "max_length": self.max_length,
            "seed": self.seed,
            "request_id": self.request_id,
        }


@dataclass(frozen=True)
class GenerationResponse:
    output_text: str
    latency_ms: float
    backend_id: str
    request_id: str


class Backend:
    """Minimal interface every backend satisfies."""

    backend_id = "backend"

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        raise NotImplementedError

    def is_healthy(self) -> bool:
        return True

    def _respond(self, request: GenerationRequest, output: str, latency_ms: float = 0.0):
        return GenerationResponse(
            output_text=output,
            latency_ms=latency_ms,
            backend_id=self.backend_id,
            request_id=request.request_id,
        )


def generate(backend: Backend, request: GenerationRequest) -> GenerationResponse:
    return backend.generate(request)


class EchoBackend(Backend):
    """Returns the input verbatim."""

    backend_id = "echo"

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        return self._respond(request, request.input_text)


class GoldOracleBackend(Backend):
    """Answers from a reference table.

    Keys are either plain input strings or ``(task, input)`` pairs; the
    task-qualified key wins when both exist. Unknown inputs raise
    UnknownRequestError.
    """

    backend_id = "gold-oracle"

    def __init__(self, table: Mapping[Union[str, tuple], str]):
        self._table = dict(table)

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        for key in ((request.task, request.input_text), request.input_text):
            if key in self._table:
                return self._respond(request, self._table[key])
        raise UnknownRequestError(
            f"no gold output for task {request.task!r}, input {request.input_text!r}"
        )


class ScriptedBackend(Backend):
    """Plays back a fixed script of outputs, one per call, recording requests."""

    backend_id = "scripted"

    def __init__(self, script: Sequence[str]):
        self._script = list(script)
        self._next = 0
        self._lock = threading.Lock()
        self.recorded: list[GenerationRequest] = []

    @property
    def calls(self) -> int:
        return self._next

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        with self._lock:
            self.recorded.append(request)
            if self._next >= len(self._script):
                raise ScriptExhaustedError(
                    f"script exhausted after {len(self._script)} call(s)"
                )
            output = self._script[self._next]
            self._next += 1
        return self._respond(request, output)


class CachedBackend(Backend):
    """Bounded-LRU cache over any backend, keyed on (task, input, decode params)."""

    def __init__(self, inner: Backend, capacity: int = 1024):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.inner = inner
        self.backend_id = inner.backend_id
        self.capacity = capacity
        self.hits = 0
        self.misses = 0
        self._entries: OrderedDict[tuple, str] = OrderedDict()
        self._lock = threading.Lock()

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        key = request.cache_key()
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self.hits += 1
                return self._respond(request, self._entries[key])
        response = self.inner.generate(request)
        with self._lock:
            self.misses += 1
            self._entries[key] = response.output_text
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
        return response

    def is_healthy(self) -> bool:
        return self.inner.is_healthy()


def cached(backend: Backend, capacity: int = 1024) -> CachedBackend:
    return CachedBackend(backend, capacity)


class RemoteBackend(Backend):
    """HTTP client for the generation wire contract, with retries.

    Timeouts, connection failures, 5xx answers and malformed payloads are
    retried up to ``retries`` extra attempts; 4xx rejections are not. Every
    HTTP attempt increments ``total_attempts``.
    """

    def __init__(
        self,
        base_url: str,
        *,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        retries: int = DEFAULT_RETRIES,
        backend_id: Optional[str] = None,
        session: Optional[requests.Session] = None,
    ):
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries
        self.backend_id = backend_id or f"remote:{self.base_url}"
        self._session = session or requests.Session()
        self.total_attempts = 0
        self.last_attempts = 0

    @property
    def endpoint(self) -> str:
        return self.base_url + "/v1/generate"

    def _attempt(self, request: GenerationRequest) -> GenerationResponse:
        started = time.perf_counter()
        try:
            http = self._session.post(
                self.endpoint, json=request.to_wire(), timeout=self.timeout_s
            )
        except requests.Timeout as exc:
            raise BackendTimeout(f"{self.endpoint} timed out after {self.timeout_s}s") from exc
        except requests.ConnectionError as exc:
            raise BackendConnectionError(f"cannot reach {self.endpoint}: {exc}") from exc
        latency_ms = (time.perf_counter() - started) * 1000.0
        if 400 <= http.status_code < 500:
            raise BackendRejectedError(
                f"{self.endpoint} rejected the request: {http.status_code} {http.text[:200]}"
            )
        if http.status_code != 200:
            raise BackendServerError(f"{self.endpoint} answered {http.status_code}")
        try:
            payload = http.json()
        except ValueError as exc:
            raise MalformedResponseError(f"{self.endpoint} sent non-JSON output") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("output"), str):
            raise MalformedResponseError(f"{self.endpoint} sent a payload without 'output'")
        if payload.get("request_id") != request.request_id:
            raise MalformedResponseError(f"{self.endpoint} echoed a mismatched request id")
        return GenerationResponse(
            output_text=payload["output"],
            latency_ms=latency_ms,
            backend_id=self.backend_id,
            request_id=request.request_id,
        )

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        attempts = 0
        last_error: Exception = BackendConnectionError("no attempt made")
        while attempts <= self.retries:
            attempts += 1
            self.total_attempts += 1
            self.last_attempts = attempts
            try:
                return self._attempt(request)
            except BackendRejectedError:
                raise
            except (BackendTimeout, BackendConnectionError, BackendServerError,
                    MalformedResponseError) as exc:
                last_error = exc
        raise last_error

    def is_healthy(self) -> bool:
        try:
            http = self._session.get(self.base_url + "/v1/health", timeout=self.timeout_s)
            return http.status_code == 200
        except requests.RequestException:
            return False


def build_backend(spec: Mapping, *, gold_table: Optional[Mapping] = None) -> Backend:
    """Construct a backend from a config mapping.

    ``{"kind": "echo"}``; ``{"kind": "scripted", "script": [...]}``;
    ``{"kind": "gold"}`` (table supplied by the caller) or
    ``{"kind": "gold", "table": {...}}``; ``{"kind": "remote", "url": ...,
    "timeout_s": ..., "retries": ...}``. An optional ``"cache"`` capacity
    wraps the backend in an LRU cache.
    """
    kind = spec.get("kind")
    if kind == "echo":
        backend: Backend = EchoBackend()
    elif kind == "scripted":
        backend = ScriptedBackend(spec.get("script", []))
    elif kind == "gold":
        table = spec.get("table", gold_table)
        if table is None:
            raise ConfigError("gold backend needs a table")
        backend = GoldOracleBackend(table)
    elif kind == "remote":
        if "url" not in spec:
            raise ConfigError("remote backend needs a url")
        backend = RemoteBackend(
            spec["url"],
            timeout_s=spec.get("timeout_s", DEFAULT_TIMEOUT_S),
            retries=spec.get("retries", DEFAULT_RETRIES),
        )
    else:
        raise ConfigError(f"unknown backend kind: {kind!r}")
    capacity = spec.get("cache")
    if capacity:
        backend = cached(backend, capacity)
    return backend
