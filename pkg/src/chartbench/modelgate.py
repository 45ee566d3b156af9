"""Uniform client layer for the three model services.

One gate fronts chart generation (chat completions), chart VQA, and
chart-to-table extraction. Every call is content-addressed: the request
payload digest keys an on-disk cache, so reruns and replay mode never
touch the network. Transient failures retry with exponential backoff up
to a bounded attempt count; totals are observable through `stats`.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .corpus import DataTable
from .prompts import PromptBundle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.1
    top_p: float = 0.9
    max_tokens: int = 2000

    def __post_init__(self) -> None:
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


ENDPOINT_KINDS = ("chat", "vqa", "extraction")


@dataclass(frozen=True)
class ModelEndpoint:
    kind: str
    base_url: str
    model_name: str
    auth_env: str | None = None
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ENDPOINT_KINDS:
            raise ValueError(f"unknown endpoint kind {self.kind!r}")
        if "://" not in self.base_url:
            raise ValueError(f"base_url {self.base_url!r} is not a URL")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff_ms: int = 250

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_backoff_ms < 0:
            raise ValueError("base_backoff_ms must be >= 0")

    def backoff_s(self, attempt: int) -> float:
        return self.base_backoff_ms * (2 ** (attempt - 1)) / 1000.0


class TransportError(Exception):
    """Non-retryable transport or protocol failure."""


class TransientTransportError(TransportError):
    """Retryable failure: 5xx status or connection-level error."""


class RetryExhaustedError(TransportError):
    def __init__(self, attempts: int, last: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last}")
        self.attempts = attempts
        self.last = last


class EmptyCompletionError(TransportError):
    """The chat endpoint returned an empty completion."""


class ReplayMissError(TransportError):
    """Replay mode found no cached response for a request."""


class ExtractionParseError(Exception):
    """Extraction text did not parse into a table; raw text retained."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class HttpTransport:
    """Speaks the declared wire contracts over HTTP POST.

    chat: chat-completions JSON ({messages: [{role, content}], ...} ->
    {choices: [{message: {content}}]}); vqa: {image_base64, question} ->
    {answer}; extraction: {image_base64} -> {table}. Auth, when configured,
    is a bearer token read from the endpoint's named environment variable.
    """

    def __init__(self) -> None:
        self._session = requests.Session()

    def post(self, endpoint: ModelEndpoint, payload: dict) -> str:
        headers = {}
        if endpoint.auth_env:
            token = os.environ.get(endpoint.auth_env)
            if not token:
                raise TransportError(
                    f"auth environment variable {endpoint.auth_env} is not set"
                )
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._session.post(
                endpoint.base_url,
                json=payload,
                headers=headers,
                timeout=endpoint.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransientTransportError(str(exc)) from exc
        if resp.status_code >= 500:
            raise TransientTransportError(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"status {resp.status_code}: {resp.text[:200]}")
        return resp.text


def strip_code_fences(text: str) -> str:
    """Remove wrapper ``` fences (with optional language tag) and outer
    whitespace; interior code is untouched."""
    s = text.strip()
    if not s:
        return s
    lines = s.splitlines()
    if lines and lines[0].startswith("```"):
        lines = lines[1:]
    if lines and lines[-1].strip() == "```":
        lines = lines[:-1]
    return "\n".join(lines)


def parse_linearized_table(text: str) -> DataTable:
    """Parse the extraction endpoint's linearized table text.

    Rows split on the literal token "<0x0A>" or newlines, cells on "|",
    whitespace trimmed; first row is the header. Anything that violates
    the table invariants raises ExtractionParseError carrying the raw text.
    """
    normalized = text.replace("<0x0A>", "\n")
    rows = [
        [cell.strip() for cell in line.split("|")]
        for line in normalized.splitlines()
        if line.strip()
    ]
    if not rows:
        raise ExtractionParseError("extraction text contains no rows", raw=text)
    headers, data = rows[0], rows[1:]
    width = len(headers)
    for i, row in enumerate(data):
        if len(row) != width:
            raise ExtractionParseError(
                f"row {i} has {len(row)} cells, expected {width}", raw=text
            )
    try:
        return DataTable.from_strings(headers, data)
    except ValueError as exc:
        raise ExtractionParseError(str(exc), raw=text) from exc


def _digest(*parts: bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.hexdigest()


class ResponseCache:
    """Content-addressed response store: one JSON file per call, no eviction.

    Writes go to a temp file then rename, so a crash never leaves a torn
    entry and concurrent writers of the same key are harmless.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        record = json.loads(path.read_text(encoding="utf-8"))
        return record["response"]

    def put(self, key: str, kind: str, model: str, response: str) -> None:
        record = {
            "key": key,
            "kind": kind,
            "model": model,
            "response": response,
            "created_at": time.time(),
        }
        # unique temp name per writer: concurrent writers of one key must
        # not race on the rename source
        tmp = self.directory / f".{key}.{os.getpid()}.{threading.get_ident()}.tmp"
        tmp.write_text(json.dumps(record, sort_keys=True), encoding="utf-8")
        os.replace(tmp, self._path(key))


class ModelGate:
    """Cache + retry + concurrency wrapper over a transport.

    `replay=True` forbids live calls entirely: a cache miss raises
    ReplayMissError instead of dispatching.
    """

    def __init__(
        self,
        cache_dir: str | Path,
        transport=None,
        retry: RetryPolicy = RetryPolicy(),
        max_in_flight: int = 4,
        replay: bool = False,
    ):
        self.cache = ResponseCache(cache_dir)
        self.transport = transport if transport is not None else HttpTransport()
        self.retry = retry
        self.replay = replay
        self._semaphores = {
            kind: threading.BoundedSemaphore(max_in_flight) for kind in ENDPOINT_KINDS
        }
        self._stats_lock = threading.Lock()
        self.stats = {"transport_calls": 0, "cache_hits": 0, "retries": 0}

    def _bump(self, counter: str, by: int = 1) -> None:
        with self._stats_lock:
            self.stats[counter] += by

    def _call(self, endpoint: ModelEndpoint, payload: dict) -> str:
        payload_bytes = json.dumps(payload, sort_keys=True).encode("utf-8")
        key = _digest(
            endpoint.kind.encode(), b"|", endpoint.model_name.encode(), b"|", payload_bytes
        )
        cached = self.cache.get(key)
        if cached is not None:
            self._bump("cache_hits")
            return cached
        if self.replay:
            raise ReplayMissError(
                f"no cached response for {endpoint.kind} call {key[:12]} in replay mode"
            )
        last_error: Exception | None = None
        with self._semaphores[endpoint.kind]:
            for attempt in range(1, self.retry.max_attempts + 1):
                try:
                    self._bump("transport_calls")
                    response = self.transport.post(endpoint, payload)
                    break
                except TransientTransportError as exc:
                    last_error = exc
                    logger.warning(
                        "%s call attempt %d/%d failed: %s",
                        endpoint.kind,
                        attempt,
                        self.retry.max_attempts,
                        exc,
                    )
                    if attempt == self.retry.max_attempts:
                        raise RetryExhaustedError(attempt, exc) from exc
                    self._bump("retries")
                    time.sleep(self.retry.backoff_s(attempt))
            else:  # pragma: no cover - loop always breaks or raises
                raise RetryExhaustedError(self.retry.max_attempts, last_error)
        self.cache.put(key, endpoint.kind, endpoint.model_name, response)
        return response

    def chat_complete(
        self,
        endpoint: ModelEndpoint,
        bundle: PromptBundle,
        params: SamplingParams = SamplingParams(),
    ) -> str:
        """Generate chart code for a prompt bundle; fences stripped."""
        if endpoint.kind != "chat":
            raise ValueError(f"endpoint kind {endpoint.kind!r} is not chat")
        payload = {
            "model": endpoint.model_name,
            "messages": bundle.as_wire_messages(),
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        }
        raw = self._call(endpoint, payload)
        try:
            content = json.loads(raw)["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat response: {exc}") from exc
        code = strip_code_fences(content)
        if not code.strip():
            raise EmptyCompletionError(f"empty completion for prompt {bundle.prompt_hash[:12]}")
        return code

    def vqa_answer(self, endpoint: ModelEndpoint, image: bytes, question: str) -> str:
        """Ask one question about one chart image; answer returned verbatim."""
        if endpoint.kind != "vqa":
            raise ValueError(f"endpoint kind {endpoint.kind!r} is not vqa")
        if not image:
            raise ValueError("image is empty")
        payload = {
            "model": endpoint.model_name,
            "image_base64": base64.b64encode(image).decode("ascii"),
            "question": question,
        }
        raw = self._call(endpoint, payload)
        try:
            answer = json.loads(raw)["answer"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed vqa response: {exc}") from exc
        if not isinstance(answer, str):
            raise TransportError(f"vqa answer is not text: {answer!r}")
        return answer

    def extract_table_raw(self, endpoint: ModelEndpoint, image: bytes) -> str:
        """Raw linearized extraction text (kept verbatim for audit records)."""
        if endpoint.kind != "extraction":
            raise ValueError(f"endpoint kind {endpoint.kind!r} is not extraction")
        if not image:
            raise ValueError("image is empty")
        payload = {
            "model": endpoint.model_name,
            "image_base64": base64.b64encode(image).decode("ascii"),
        }
        raw = self._call(endpoint, payload)
        try:
            text = json.loads(raw)["table"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed extraction response: {exc}") from exc
        if not isinstance(text, str):
            raise TransportError(f"extraction table is not text: {text!r}")
        return text

    def extract_table(self, endpoint: ModelEndpoint, image: bytes) -> DataTable:
        """Extract the data table depicted in a chart image."""
        return parse_linearized_table(self.extract_table_raw(endpoint, image))
