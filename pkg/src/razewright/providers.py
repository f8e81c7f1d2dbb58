"""Chat-completion and embedding clients over the OpenAI-compatible wire
protocol, plus scripted offline twins.

Every network operation has a mock counterpart honoring the same contract
(including the retry policy), so the full test suite and the CLI `--mock`
mode run with zero network access. Mocks are pure functions of (script
state, request): replaying a script yields byte-identical transcripts.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

from .errors import (
    DimMismatch,
    InvalidInput,
    ProtocolError,
    ProviderError,
    RateLimited,
    TransportError,
    ZeroVector,
)

ROLES = ("system", "user", "assistant")

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF_BASE = 0.5
DEFAULT_CONCURRENCY = 4
DEFAULT_MOCK_DIM = 64


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidInput(f"unknown role: {self.role!r}")
        if self.content is None:
            raise InvalidInput("message content must not be None")


@dataclass
class ChatRequest:
    model: str
    messages: list[ChatMessage]
    temperature: float = 0.7
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise InvalidInput("at least one message required")
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidInput("temperature must be in [0, 2]")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise InvalidInput("max_tokens must be positive when set")
        system_positions = [i for i, m in enumerate(self.messages) if m.role == "system"]
        if system_positions and system_positions != [0]:
            raise InvalidInput("system message must be unique and first")

    def text(self) -> str:
        """All message contents joined; what mock rules match against."""
        return "\n".join(m.content for m in self.messages)


def user_request(model: str, prompt: str, system: str | None = None, temperature: float = 0.7) -> ChatRequest:
    messages = []
    if system:
        messages.append(ChatMessage("system", system))
    messages.append(ChatMessage("user", prompt))
    return ChatRequest(model=model, messages=messages, temperature=temperature)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise InvalidInput("empty embedding vector")
        if not all(math.isfinite(v) for v in self.values):
            raise InvalidInput("embedding values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, clamped into [-1, 1] against rounding spill."""
    if a.dim != b.dim:
        raise DimMismatch(f"dims differ: {a.dim} vs {b.dim}")
    na = math.sqrt(sum(v * v for v in a.values))
    nb = math.sqrt(sum(v * v for v in b.values))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for the zero vector")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (na * nb)))


@dataclass
class ProviderConfig:
    base_url: str
    model: str
    api_key_env: str = "RAZEWRIGHT_API_KEY"
    timeout: float = 60.0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    backoff_base: float = DEFAULT_BACKOFF_BASE
    max_concurrency: int = DEFAULT_CONCURRENCY


class ChatProvider(Protocol):
    def chat(self, req: ChatRequest) -> str: ...


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def call_with_retries(
    fn: Callable[[], str],
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    backoff_base: float = DEFAULT_BACKOFF_BASE,
    sleep: Callable[[float], None] = time.sleep,
):
    """Run fn, retrying on transport errors, 429, and 5xx responses."""
    attempt = 0
    while True:
        attempt += 1
        try:
            return fn()
        except RateLimited as exc:
            if attempt >= max_attempts:
                raise
            sleep(exc.retry_after if exc.retry_after is not None else backoff_base * 2 ** (attempt - 1))
        except TransportError:
            if attempt >= max_attempts:
                raise
            sleep(backoff_base * 2 ** (attempt - 1))
        except ProtocolError as exc:
            if exc.status < 500 or attempt >= max_attempts:
                raise
            sleep(backoff_base * 2 ** (attempt - 1))


def _validate_texts(texts: Sequence[str]):
    if not texts:
        raise InvalidInput("no texts to embed")
    for i, t in enumerate(texts):
        if not t:
            raise InvalidInput(f"text {i} is empty")


class HttpClient:
    """Thin client for POST {base_url}/chat/completions and {base_url}/embeddings.

    Shareable across threads; a semaphore bounds in-flight requests. Token
    usage reported by the server accumulates in .usage.
    """

    def __init__(
        self,
        config: ProviderConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        self._sem = threading.BoundedSemaphore(config.max_concurrency)
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            transport=transport,
        )
        self.usage: dict[str, int] = {}

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        try:
            with self._sem:
                resp = self._client.post(path, json=payload, headers=self._headers())
        except httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            retry_after = resp.headers.get("Retry-After")
            raise RateLimited(float(retry_after) if retry_after else None)
        if not (200 <= resp.status_code < 300):
            raise ProtocolError(resp.status_code, resp.text)
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(resp.status_code, f"invalid JSON body: {resp.text[:200]}") from exc

    def _record_usage(self, body: dict):
        usage = body.get("usage")
        if isinstance(usage, dict):
            for key, value in usage.items():
                if isinstance(value, int):
                    self.usage[key] = self.usage.get(key, 0) + value

    def chat(self, req: ChatRequest) -> str:
        payload = {
            "model": req.model or self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
        }
        if req.max_tokens is not None:
            payload["max_tokens"] = req.max_tokens

        def once() -> str:
            body = self._post("/chat/completions", payload)
            self._record_usage(body)
            try:
                content = body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProtocolError(200, f"malformed completion body: {json.dumps(body)[:200]}") from exc
            if not isinstance(content, str):
                raise ProtocolError(200, "assistant content is not a string")
            return content

        return call_with_retries(once, self.config.max_attempts, self.config.backoff_base, self._sleep)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _validate_texts(texts)
        payload = {"model": self.config.model, "input": list(texts)}

        def once() -> list[EmbeddingVector]:
            body = self._post("/embeddings", payload)
            self._record_usage(body)
            try:
                rows = sorted(body["data"], key=lambda d: d["index"])
                vectors = [EmbeddingVector(tuple(float(v) for v in row["embedding"])) for row in rows]
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(200, f"malformed embeddings body: {json.dumps(body)[:200]}") from exc
            if len(vectors) != len(texts):
                raise ProtocolError(200, f"expected {len(texts)} embeddings, got {len(vectors)}")
            dims = {v.dim for v in vectors}
            if len(dims) > 1:
                raise DimMismatch(f"server returned inconsistent dims: {sorted(dims)}")
            return vectors

        return call_with_retries(once, self.config.max_attempts, self.config.backoff_base, self._sleep)


# --- scripted offline twins -------------------------------------------------


@dataclass(frozen=True)
class ScriptedFailure:
    kind: str  # transport | rate_limited | protocol
    status: int = 500
    retry_after: float | None = None

    def raise_(self):
        if self.kind == "transport":
            raise TransportError("scripted transport failure")
        if self.kind == "rate_limited":
            raise RateLimited(self.retry_after)
        if self.kind == "protocol":
            raise ProtocolError(self.status, "scripted protocol failure")
        raise InvalidInput(f"unknown scripted failure kind: {self.kind}")


@dataclass
class MockChatProvider:
    """Deterministic chat provider driven by a script.

    Resolution order per call: pop the next queue entry if any; else the
    first rule whose `on` substring occurs in the request text; else the
    default reply. Failures in the queue raise and are consumed, so the
    retry loop sees the next entry on the following attempt.
    """

    queue: list[str | ScriptedFailure] = field(default_factory=list)
    rules: list[tuple[str, str]] = field(default_factory=list)
    default: str | None = None
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        self._lock = threading.Lock()
        self.transcript: list[tuple[str, str]] = []
        self.calls = 0

    def _resolve(self, req: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
            if self.queue:
                entry = self.queue.pop(0)
                if isinstance(entry, ScriptedFailure):
                    entry.raise_()
                reply = entry
            else:
                text = req.text()
                for needle, reply_text in self.rules:
                    if needle in text:
                        reply = reply_text
                        break
                else:
                    if self.default is None:
                        raise ProviderError("mock chat script exhausted and no default reply")
                    reply = self.default
            self.transcript.append((req.text(), reply))
            return reply

    def chat(self, req: ChatRequest) -> str:
        return call_with_retries(
            lambda: self._resolve(req), self.max_attempts, backoff_base=0.0, sleep=lambda _: None
        )


class HashEmbedder:
    """Seeded character n-gram hash embedding, L2-normalized.

    Deterministic across processes (blake2b, not hash()), discriminative
    enough to rank passages in tests; the offline twin of the embeddings
    endpoint.
    """

    def __init__(self, dim: int = DEFAULT_MOCK_DIM, seed: int = 0, ngram_sizes: Sequence[int] = (1, 2, 3)):
        if dim < 1:
            raise InvalidInput("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.ngram_sizes = tuple(ngram_sizes)

    def _digest(self, payload: str) -> bytes:
        return hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()

    def _embed_one(self, text: str) -> EmbeddingVector:
        acc = [0.0] * self.dim
        for n in self.ngram_sizes:
            for i in range(len(text) - n + 1):
                gram = text[i : i + n]
                digest = self._digest(f"{self.seed}|{n}|{gram}")
                idx = int.from_bytes(digest[:4], "big") % self.dim
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                acc[idx] += sign
        if all(v == 0.0 for v in acc):
            digest = self._digest(f"{self.seed}|fallback|{text}")
            acc[int.from_bytes(digest[:4], "big") % self.dim] = 1.0
        norm = math.sqrt(sum(v * v for v in acc))
        return EmbeddingVector(tuple(v / norm for v in acc))

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _validate_texts(texts)
        return [self._embed_one(t) for t in texts]


@dataclass
class MockScript:
    """Parsed --mock script: a chat provider plus an embedder."""

    chat: MockChatProvider
    embedder: HashEmbedder


def load_mock_script(path: str | Path) -> MockScript:
    """Read a JSONL mock script.

    Line forms: {"reply": s} queued reply; {"fail": kind, ...} queued
    failure; {"on": substr, "reply": s} persistent rule; {"default": s}
    fallback reply; {"embed": {"dim": n, "seed": n}} embedder settings.
    """
    queue: list[str | ScriptedFailure] = []
    rules: list[tuple[str, str]] = []
    default: str | None = None
    embed_cfg = {"dim": DEFAULT_MOCK_DIM, "seed": 0}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if "fail" in entry:
            queue.append(
                ScriptedFailure(
                    entry["fail"],
                    status=int(entry.get("status", 500)),
                    retry_after=entry.get("retry_after"),
                )
            )
        elif "on" in entry:
            rules.append((entry["on"], entry["reply"]))
        elif "default" in entry:
            default = entry["default"]
        elif "embed" in entry:
            embed_cfg.update(entry["embed"])
        elif "reply" in entry:
            queue.append(entry["reply"])
        else:
            raise InvalidInput(f"{path}:{lineno}: unrecognized script entry: {line[:80]}")
    return MockScript(
        chat=MockChatProvider(queue=queue, rules=rules, default=default),
        embedder=HashEmbedder(**embed_cfg),
    )


# Spec-shaped convenience wrappers around one-shot clients.


def chat(endpoint: ProviderConfig, req: ChatRequest) -> str:
    return HttpClient(endpoint).chat(req)


def embed(endpoint: ProviderConfig, texts: Sequence[str]) -> list[EmbeddingVector]:
    return HttpClient(endpoint).embed(texts)
