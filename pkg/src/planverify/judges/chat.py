"""Chat-completion client: HTTP transport, retries and an append-only cache.

The cache is a JSON-lines file. Each record is::

    {"key": ..., "model": ..., "request_hash": ..., "content": ...,
     "usage": {...}, "timestamp": ..., "digest": ...}

``key`` addresses the response by (model, messages, temperature);
``request_hash`` covers the full wire payload; ``digest`` binds ``content``
to ``key`` and is checked on load.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from ..errors import AuthError, CacheCorrupt, TransientError, TransportError

log = logging.getLogger(__name__)

ENV_ENDPOINT = "PV_LLM_ENDPOINT"
ENV_API_KEY = "PV_LLM_API_KEY"
ENV_MODEL = "PV_LLM_MODEL"
ENV_CACHE_DIR = "PV_CACHE_DIR"
CACHE_FILENAME = "chat_cache.jsonl"


@dataclass(frozen=True)
class ChatRequest:
    endpoint: str
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 2048

    @classmethod
    def build(cls, endpoint: str, model: str, messages: list[dict[str, str]], **kw: Any) -> ChatRequest:
        return cls(endpoint, model, tuple((m["role"], m["content"]) for m in messages), **kw)

    def payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    @property
    def cache_key(self) -> str:
        return _sha256({"model": self.model, "messages": self.payload()["messages"], "temperature": self.temperature})

    @property
    def request_hash(self) -> str:
        return _sha256({"endpoint": self.endpoint, **self.payload()})


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: dict = field(default_factory=dict)
    latency: float = 0.0
    cached: bool = False
    retries: int = 0


def _sha256(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _digest(key: str, content: str) -> str:
    return hashlib.sha256(f"{key}\n{content}".encode("utf-8")).hexdigest()


class Transport(Protocol):
    def send(self, req: ChatRequest, api_key: str) -> ChatResponse: ...


class HttpTransport:
    """OpenAI-style ``/chat/completions`` over HTTP with JSON bodies."""

    def __init__(self, timeout: float = 120.0, client: httpx.Client | None = None):
        self._client = client or httpx.Client(timeout=timeout)

    def send(self, req: ChatRequest, api_key: str) -> ChatResponse:
        start = time.monotonic()
        try:
            r = self._client.post(
                req.endpoint,
                json=req.payload(),
                headers={"Authorization": f"Bearer {api_key}"},
            )
        except httpx.TimeoutException as e:
            raise TransientError(f"timeout: {e}") from e
        except httpx.TransportError as e:
            raise TransientError(f"connection error: {e}") from e
        if r.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials (HTTP {r.status_code})")
        if r.status_code == 429 or r.status_code >= 500:
            retry_after = None
            if "retry-after" in r.headers:
                try:
                    retry_after = float(r.headers["retry-after"])
                except ValueError:
                    pass
            raise TransientError(f"HTTP {r.status_code}", retry_after)
        if r.status_code >= 400:
            raise TransportError(f"HTTP {r.status_code}: {r.text[:200]}")
        try:
            body = r.json()
            content = body["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"unexpected response body: {e}") from e
        return ChatResponse(content, body.get("usage") or {}, time.monotonic() - start)


class ResponseCache:
    """Append-only JSONL cache; safe for concurrent readers within a process."""

    def __init__(self, path: str | os.PathLike[str]):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key, content = rec["key"], rec["content"]
                    ok = isinstance(key, str) and isinstance(content, str) and rec.get("digest") == _digest(key, content)
                except (ValueError, KeyError, TypeError):
                    ok = False
                if not ok:
                    raise CacheCorrupt(f"{self.path}:{lineno}: record fails integrity check")
                self._records[key] = rec

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: str) -> dict | None:
        return self._records.get(key)

    def put(self, req: ChatRequest, resp: ChatResponse) -> None:
        key = req.cache_key
        rec = {
            "key": key,
            "model": req.model,
            "request_hash": req.request_hash,
            "content": resp.content,
            "usage": resp.usage,
            "timestamp": time.time(),
            "digest": _digest(key, resp.content),
        }
        line = json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            if key in self._records:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)
            self._records[key] = rec


@dataclass
class RetryPolicy:
    max_retries: int = 3
    backoff: float = 0.5
    max_backoff: float = 30.0

    def delay(self, attempt: int, hint: float | None) -> float:
        if hint is not None:
            return min(hint, self.max_backoff)
        return min(self.backoff * (2**attempt), self.max_backoff)


class ChatClient:
    """Cached, retrying chat-completion client.

    ``calls`` counts transport round-trips; cache hits do not touch it.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None,
        transport: Transport | None = None,
        cache: ResponseCache | None = None,
        retry: RetryPolicy | None = None,
        temperature: float = 0.0,
        max_tokens: int = 2048,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.transport = transport or HttpTransport()
        self.cache = cache
        self.retry = retry or RetryPolicy()
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.sleep = sleep
        self.calls = 0
        self._count_lock = threading.Lock()

    @classmethod
    def from_env(cls, cache_path: str | None = None, **kw: Any) -> ChatClient:
        endpoint = os.environ.get(ENV_ENDPOINT, "https://api.openai.com/v1/chat/completions")
        model = os.environ.get(ENV_MODEL, "gpt-4o-mini")
        if cache_path is None and os.environ.get(ENV_CACHE_DIR):
            cache_path = str(Path(os.environ[ENV_CACHE_DIR]) / CACHE_FILENAME)
        cache = ResponseCache(cache_path) if cache_path else None
        return cls(endpoint, model, os.environ.get(ENV_API_KEY), cache=cache, **kw)

    @property
    def label(self) -> str:
        return f"{self.model}@t{self.temperature:g}"

    def request(self, messages: list[dict[str, str]]) -> ChatRequest:
        return ChatRequest.build(
            self.endpoint, self.model, messages, temperature=self.temperature, max_tokens=self.max_tokens
        )

    def complete(self, messages: list[dict[str, str]]) -> ChatResponse:
        return chat_complete(self.request(messages), client=self)


def chat_complete(req: ChatRequest, client: ChatClient) -> ChatResponse:
    """Serve ``req`` from the cache, or send it with bounded retries."""
    if client.cache is not None:
        hit = client.cache.get(req.cache_key)
        if hit is not None:
            return ChatResponse(hit["content"], hit.get("usage") or {}, 0.0, cached=True)
    if not client.api_key:
        raise AuthError(f"no API key configured; set {ENV_API_KEY}")

    attempt = 0
    while True:
        with client._count_lock:
            client.calls += 1
        try:
            resp = client.transport.send(req, client.api_key)
            break
        except AuthError:
            raise
        except TransientError as e:
            if attempt >= client.retry.max_retries:
                raise TransportError(f"giving up after {attempt + 1} attempts: {e}") from e
            wait = client.retry.delay(attempt, e.retry_after)
            log.warning("transient failure (%s); retry %d in %.2fs", e, attempt + 1, wait)
            client.sleep(wait)
            attempt += 1

    resp = ChatResponse(resp.content, resp.usage, resp.latency, cached=False, retries=attempt)
    if client.cache is not None:
        client.cache.put(req, resp)
    return resp
