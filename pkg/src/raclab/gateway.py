"""Reasoner interface and its live and record/replay implementations."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .config import Config
from .errors import CacheCollision, ReasonerError, ReplayMiss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReasonerRequest:
    messages: tuple[tuple[str, str], ...]
    model: str = "mock"
    temperature: float = 0.0
    max_tokens: int = 2048
    n: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "messages", tuple((r, t) for r, t in self.messages))

    @property
    def prompt(self) -> str:
        """Text of the last user message."""
        for role, text in reversed(self.messages):
            if role == "user":
                return text
        return ""

    def canonical(self) -> dict:
        return {
            "messages": [[role, normalize_text(text)] for role, text in self.messages],
            "model": self.model,
            "temperature": float(self.temperature),
            "max_tokens": int(self.max_tokens),
            "n": int(self.n),
        }


def normalize_text(text: str) -> str:
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    return "\n".join(line.rstrip() for line in lines).rstrip()


def cache_key(req: ReasonerRequest) -> str:
    blob = json.dumps(req.canonical(), ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Completion:
    texts: tuple[str, ...]
    cached: bool = False
    latency: float = 0.0


@dataclass(frozen=True)
class TranscriptEntry:
    request: ReasonerRequest
    responses: tuple[str, ...]
    latency: float
    cached: bool

    def to_json(self) -> dict:
        return {
            "key": cache_key(self.request),
            "request": self.request.canonical(),
            "responses": list(self.responses),
            "latency": round(self.latency, 6),
            "cached": self.cached,
        }


class Transcript:
    """Append-only log of reasoner calls made during one run."""

    def __init__(self):
        self._entries: list[TranscriptEntry] = []

    def append(self, entry: TranscriptEntry) -> None:
        self._entries.append(entry)

    @property
    def entries(self) -> tuple[TranscriptEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self._entries]


class Reasoner:
    """Something that answers chat requests with ``n`` texts."""

    def complete(self, req: ReasonerRequest) -> list[str]:
        raise NotImplementedError

    def complete_traced(self, req: ReasonerRequest) -> Completion:
        return Completion(tuple(self.complete(req)))


def call(r: Reasoner, req: ReasonerRequest, transcript: Transcript | None = None) -> list[str]:
    """Complete ``req`` and log it to ``transcript``."""
    res = r.complete_traced(req)
    if len(res.texts) != req.n:
        raise ReasonerError(f"reasoner returned {len(res.texts)} texts for n={req.n}")
    if transcript is not None:
        transcript.append(TranscriptEntry(req, res.texts, res.latency, res.cached))
    return list(res.texts)


class CountingReasoner(Reasoner):
    """Wraps another reasoner (or nothing) and counts calls."""

    def __init__(self, inner: Reasoner | None = None):
        self.inner = inner
        self.calls: list[ReasonerRequest] = []
        self._lock = threading.Lock()

    def complete_traced(self, req: ReasonerRequest) -> Completion:
        with self._lock:
            self.calls.append(req)
        if self.inner is None:
            raise ReasonerError("counting reasoner has no backend")
        return self.inner.complete_traced(req)

    def complete(self, req):
        return list(self.complete_traced(req).texts)


# -- live HTTP ---------------------------------------------------------------

class TokenBucket:
    def __init__(self, rate: float, burst: int = 1, clock=time.monotonic, sleep=time.sleep):
        self.rate = rate
        self.capacity = max(1, burst)
        self.tokens = float(self.capacity)
        self.clock = clock
        self.sleep = sleep
        self.last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.last) * self.rate)
                self.last = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self.sleep(wait)


_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class LiveReasoner(Reasoner):
    """OpenAI-style ``/chat/completions`` client.

    Transient failures (transport errors, 429 and 5xx) are retried with
    exponential backoff up to ``cfg.retry_max`` attempts; authentication
    failures are not retried.  Providers that return fewer than ``n`` choices
    are asked again for the remainder.
    """

    def __init__(
        self,
        cfg: Config,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self.api_key = api_key if api_key is not None else cfg.api_key()
        if not self.api_key:
            raise ReasonerError(f"no API key: set ${cfg.api_key_env}")
        self.client = client or httpx.Client(timeout=cfg.timeout)
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(cfg.parallelism)
        self._bucket = TokenBucket(cfg.rate_limit, sleep=sleep) if cfg.rate_limit else None

    def complete_traced(self, req: ReasonerRequest) -> Completion:
        start = time.perf_counter()
        texts: list[str] = []
        while len(texts) < req.n:
            texts.extend(self._post(req, req.n - len(texts)))
        return Completion(tuple(texts[: req.n]), False, time.perf_counter() - start)

    def complete(self, req):
        return list(self.complete_traced(req).texts)

    def _post(self, req: ReasonerRequest, n: int) -> list[str]:
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": req.model,
            "messages": [{"role": r, "content": t} for r, t in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "n": n,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error = "no attempt made"
        last_retry_after: float | None = None
        for attempt in range(self.cfg.retry_max):
            if attempt:
                self.sleep(self._backoff(attempt, last_retry_after))
            last_retry_after = None
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                with self._slots:
                    resp = self.client.post(url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
                log.warning("attempt %d: %s", attempt + 1, last_error)
                continue
            if resp.status_code in (401, 403):
                raise ReasonerError(f"authentication failed ({resp.status_code})")
            if resp.status_code in _RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                last_retry_after = _retry_after(resp)
                log.warning("attempt %d: %s", attempt + 1, last_error)
                continue
            if resp.status_code >= 400:
                raise ReasonerError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                choices = resp.json()["choices"]
                ordered = sorted(choices, key=lambda c: c.get("index", 0))
                return [c["message"]["content"] or "" for c in ordered]
            except (ValueError, KeyError, TypeError) as exc:
                raise ReasonerError(f"malformed completion payload: {exc}") from None
        raise ReasonerError(f"gave up after {self.cfg.retry_max} attempts: {last_error}")

    def _backoff(self, attempt: int, retry_after: float | None) -> float:
        delay = self.cfg.backoff_base * (2 ** (attempt - 1))
        return max(delay, retry_after or 0.0)


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("Retry-After")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


# -- record / replay ---------------------------------------------------------

class CachingReasoner(Reasoner):
    """Content-addressed response cache, one JSON file per key.

    ``record`` serves hits from disk and forwards misses to ``inner``,
    persisting the answer; ``replay`` never forwards and raises ReplayMiss.
    """

    def __init__(self, cache_dir: str | Path, mode: str = "replay", inner: Reasoner | None = None):
        if mode not in ("record", "replay"):
            raise ValueError("mode must be 'record' or 'replay'")
        if mode == "record" and inner is None:
            raise ValueError("record mode needs an inner reasoner")
        self.dir = Path(cache_dir)
        self.mode = mode
        self.inner = inner
        self._lock = threading.Lock()

    def path_for(self, key: str) -> Path:
        return self.dir / key[:2] / f"{key}.json"

    def lookup(self, req: ReasonerRequest) -> tuple[str, ...] | None:
        key = cache_key(req)
        path = self.path_for(key)
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("request") != req.canonical():
            raise CacheCollision(f"cache key {key} maps to a different request")
        return tuple(doc["responses"])

    def store(self, req: ReasonerRequest, responses: Sequence[str]) -> None:
        key = cache_key(req)
        path = self.path_for(key)
        doc = {"key": key, "request": req.canonical(), "responses": list(responses)}
        with self._lock:
            if path.exists():
                existing = json.loads(path.read_text(encoding="utf-8"))
                if existing.get("request") != doc["request"]:
                    raise CacheCollision(f"cache key {key} already holds a different request")
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, ensure_ascii=False, indent=1, sort_keys=True)
                    fh.write("\n")
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise

    def complete_traced(self, req: ReasonerRequest) -> Completion:
        hit = self.lookup(req)
        if hit is not None:
            return Completion(hit, cached=True, latency=0.0)
        if self.mode == "replay":
            raise ReplayMiss(cache_key(req))
        res = self.inner.complete_traced(req)
        self.store(req, res.texts)
        return Completion(res.texts, cached=False, latency=res.latency)

    def complete(self, req):
        return list(self.complete_traced(req).texts)
