"""External model boundary: one chat contract and one embedding contract.

Every role that needs a language model (extractor, planner, synthesizer,
judge) goes through :class:`ChatClient`; semantic search and synonymy go
through :class:`EmbeddingClient`.  Both sit on a swappable *provider* so the
whole pipeline can run against deterministic stubs with no network.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import math
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CHAT_MODEL = "gpt-4.1-mini"
DEFAULT_EMBED_MODEL = "nvidia/NV-Embed-v2"


class ClientError(Exception):
    pass


class ProviderUnavailable(ClientError):
    pass


class TransientProviderError(ClientError):
    """Raised by providers for failures worth retrying (timeouts, 429, 5xx)."""


class BudgetExceeded(ClientError):
    pass


class DimensionMismatch(ClientError):
    pass


class EmbeddingUnavailable(ProviderUnavailable):
    pass


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: Tuple[Tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        msgs = tuple((str(r), str(c)) for r, c in self.messages)
        if not msgs:
            raise ValueError("a chat request needs at least one message")
        object.__setattr__(self, "messages", msgs)

    @classmethod
    def simple(cls, prompt: str, model: str = DEFAULT_CHAT_MODEL, **kw) -> "ChatRequest":
        return cls(model=model, messages=(("user", prompt),), **kw)

    def canonical(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "messages": [list(m) for m in self.messages],
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )

    def cache_key(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def estimated_tokens(self) -> int:
        chars = sum(len(c) for _, c in self.messages)
        return math.ceil(chars / 4)

    @property
    def prompt(self) -> str:
        return "\n\n".join(c for _, c in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("usage counters must be non-negative")

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


class TokenLedger:
    """Token usage per phase (``indexing``, ``inference``, ``eval`` ...)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._local = threading.local()
        self.usage: Dict[str, Dict[str, int]] = {}

    @property
    def current_phase(self) -> str:
        return getattr(self._local, "phase", "default")

    @contextlib.contextmanager
    def phase(self, name: str):
        prev = self.current_phase
        self._local.phase = name
        try:
            yield self
        finally:
            self._local.phase = prev

    def record(self, prompt_tokens: int, completion_tokens: int, calls: int = 1) -> None:
        with self._lock:
            row = self.usage.setdefault(
                self.current_phase, {"input": 0, "output": 0, "calls": 0}
            )
            row["input"] += prompt_tokens
            row["output"] += completion_tokens
            row["calls"] += calls

    def total(self) -> int:
        return sum(r["input"] + r["output"] for r in self.usage.values())


class DiskCache:
    """Content-addressed JSON/bytes store; files are written via atomic rename."""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)

    def _path(self, namespace: str, key: str, suffix: str) -> Path:
        return self.root / namespace / key[:2] / f"{key}{suffix}"

    def get_json(self, namespace: str, key: str) -> Optional[dict]:
        p = self._path(namespace, key, ".json")
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            logger.warning("ignoring corrupt cache entry %s", p)
            return None

    def put_json(self, namespace: str, key: str, value: dict) -> None:
        payload = json.dumps(value, sort_keys=True, ensure_ascii=False).encode("utf-8")
        self._write(self._path(namespace, key, ".json"), payload)

    def get_bytes(self, namespace: str, key: str) -> Optional[bytes]:
        try:
            return self._path(namespace, key, ".bin").read_bytes()
        except FileNotFoundError:
            return None

    def put_bytes(self, namespace: str, key: str, value: bytes) -> None:
        self._write(self._path(namespace, key, ".bin"), value)

    @staticmethod
    def _write(path: Path, payload: bytes) -> None:
        if path.exists():
            return  # immutable once written
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)
            raise


def default_cache() -> Optional[DiskCache]:
    root = os.environ.get("REMEM_CACHE_DIR")
    return DiskCache(root) if root else None


# -- chat ---------------------------------------------------------------


class ChatProvider:
    tag = "chat"

    def complete(self, req: ChatRequest) -> ChatResponse:  # pragma: no cover - interface
        raise NotImplementedError


class HttpChatProvider(ChatProvider):
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 60.0,
        transport=None,
    ) -> None:
        import httpx

        self.tag = f"http:{base_url}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    def complete(self, req: ChatRequest) -> ChatResponse:
        import httpx

        body = {
            "model": req.model,
            "messages": [{"role": r, "content": c} for r, c in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        try:
            resp = self._client.post("/chat/completions", json=body)
        except httpx.TransportError as exc:
            raise TransientProviderError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        usage = data.get("usage") or {}
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"unexpected chat payload: {str(data)[:200]}") from exc
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )


class StubChatProvider(ChatProvider):
    """Deterministic test double.

    ``replies`` is either a callable ``request -> str`` or a mapping from
    request cache key (or exact prompt text) to reply.  Unknown prompts get
    ``default`` or raise :class:`ProviderUnavailable`.
    """

    def __init__(
        self,
        replies: Union[Callable[[ChatRequest], str], Mapping[str, str], None] = None,
        default: Optional[str] = None,
        tag: str = "stub",
    ) -> None:
        self.replies = replies or {}
        self.default = default
        self.tag = tag
        self.calls = 0
        self.requests: List[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            self.requests.append(req)
        if callable(self.replies):
            text = self.replies(req)
        elif req.cache_key() in self.replies:
            text = self.replies[req.cache_key()]
        elif req.prompt in self.replies:
            text = self.replies[req.prompt]
        elif self.default is not None:
            text = self.default
        else:
            raise ProviderUnavailable("stub has no reply for this prompt")
        return ChatResponse(text, req.estimated_tokens(), math.ceil(len(text) / 4))


class ChatClient:
    """Retries, caching, budget enforcement and token accounting around a provider."""

    def __init__(
        self,
        provider: ChatProvider,
        *,
        model: str = DEFAULT_CHAT_MODEL,
        cache: Optional[DiskCache] = None,
        max_retries: int = 3,
        backoff: float = 0.5,
        token_ceiling: Optional[int] = None,
        ledger: Optional[TokenLedger] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.provider = provider
        self.model = model
        self.cache = cache
        self.max_retries = max_retries
        self.backoff = backoff
        self.token_ceiling = token_ceiling
        self.ledger = ledger or TokenLedger()
        self._sleep = sleep
        self._spent = 0
        self._lock = threading.Lock()

    @classmethod
    def from_env(cls, **kw) -> "ChatClient":
        base = os.environ.get("REMEM_CHAT_BASE_URL", "https://api.openai.com/v1")
        key = os.environ.get("REMEM_CHAT_API_KEY")
        if not key:
            raise ProviderUnavailable("REMEM_CHAT_API_KEY is not set")
        kw.setdefault("cache", default_cache())
        kw.setdefault("model", os.environ.get("REMEM_CHAT_MODEL", DEFAULT_CHAT_MODEL))
        return cls(HttpChatProvider(base, key), **kw)

    def complete(self, prompt: str, *, system: Optional[str] = None, **kw) -> str:
        msgs = ((("system", system),) if system else ()) + (("user", prompt),)
        return self.chat(ChatRequest(model=self.model, messages=msgs, **kw)).text

    def chat(self, req: ChatRequest) -> ChatResponse:
        namespace = f"chat/{_safe(self.provider.tag)}"
        key = req.cache_key()
        if self.cache is not None:
            hit = self.cache.get_json(namespace, key)
            if hit is not None:
                return ChatResponse(**hit)
        estimate = req.estimated_tokens()
        with self._lock:
            if self.token_ceiling is not None and self._spent + estimate > self.token_ceiling:
                raise BudgetExceeded(
                    f"request needs ~{estimate} tokens, {self.token_ceiling - self._spent} left"
                )
        resp = self._with_retries(lambda: self.provider.complete(req))
        with self._lock:
            self._spent += resp.prompt_tokens + resp.completion_tokens
        self.ledger.record(resp.prompt_tokens, resp.completion_tokens)
        if self.cache is not None:
            self.cache.put_json(namespace, key, resp.to_json())
        return resp

    def _with_retries(self, fn):
        for attempt in range(self.max_retries + 1):
            try:
                return fn()
            except TransientProviderError as exc:
                if attempt == self.max_retries:
                    raise ProviderUnavailable(
                        f"gave up after {attempt + 1} attempts: {exc}"
                    ) from exc
                delay = self.backoff * (2**attempt)
                logger.warning("transient provider failure (%s); retrying in %.2fs", exc, delay)
                self._sleep(delay)


# -- embeddings ---------------------------------------------------------


class EmbeddingProvider:
    tag = "embed"
    batch_limit = 64

    def embed(self, texts: Sequence[str]) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class HashEmbeddingProvider(EmbeddingProvider):
    """Seeded text-hash to unit vector.  Same text, same vector, no network."""

    def __init__(self, dim: int = 64, seed: int = 0) -> None:
        self.dim = dim
        self.seed = seed
        self.tag = f"mock:{dim}:{seed}"
        self.calls = 0
        self.texts_seen: List[str] = []

    def vector(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        self.calls += 1
        self.texts_seen.extend(texts)
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self.vector(t) for t in texts])


class StaticEmbeddingProvider(HashEmbeddingProvider):
    """Hash embeddings with explicit overrides for chosen texts."""

    def __init__(self, table: Mapping[str, Sequence[float]], dim: Optional[int] = None, seed: int = 0):
        dims = {len(v) for v in table.values()}
        if dim is None:
            if len(dims) != 1:
                raise ValueError("cannot infer a single dimension from the table")
            dim = dims.pop()
        super().__init__(dim=dim, seed=seed)
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        blob = json.dumps({k: list(map(float, v)) for k, v in sorted(self.table.items())})
        self.tag = f"static:{hashlib.sha256(blob.encode()).hexdigest()[:12]}"

    def vector(self, text: str) -> np.ndarray:
        if text in self.table:
            return self.table[text].copy()
        return super().vector(text)


class HttpEmbeddingProvider(EmbeddingProvider):
    """OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(self, base_url: str, api_key: str, model: str, timeout: float = 60.0, transport=None):
        import httpx

        self.model = model
        self.tag = f"http:{model}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import httpx

        try:
            resp = self._client.post("/embeddings", json={"model": self.model, "input": list(texts)})
        except httpx.TransportError as exc:
            raise TransientProviderError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        rows = sorted(resp.json()["data"], key=lambda d: d["index"])
        return np.asarray([r["embedding"] for r in rows], dtype=np.float64)


class EmbeddingClient:
    """Batched, cached, L2-normalised embeddings with a fixed dimension."""

    def __init__(
        self,
        provider: EmbeddingProvider,
        *,
        cache: Optional[DiskCache] = None,
        batch_size: Optional[int] = None,
        max_retries: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.provider = provider
        self.cache = cache
        self.batch_size = batch_size or provider.batch_limit
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        self._memory: Dict[str, np.ndarray] = {}
        self.dim: Optional[int] = getattr(provider, "dim", None)
        self._lock = threading.Lock()

    @property
    def tag(self) -> str:
        return self.provider.tag

    @classmethod
    def from_env(cls, **kw) -> "EmbeddingClient":
        base = os.environ.get("REMEM_EMBED_BASE_URL", "https://api.openai.com/v1")
        key = os.environ.get("REMEM_EMBED_API_KEY")
        if not key:
            raise EmbeddingUnavailable("REMEM_EMBED_API_KEY is not set")
        model = os.environ.get("REMEM_EMBED_MODEL", DEFAULT_EMBED_MODEL)
        kw.setdefault("cache", default_cache())
        return cls(HttpEmbeddingProvider(base, key, model), **kw)

    def _key(self, text: str) -> str:
        return hashlib.sha256(f"{self.provider.tag}\x00{text}".encode("utf-8")).hexdigest()

    def _lookup(self, key: str) -> Optional[np.ndarray]:
        hit = self._memory.get(key)
        if hit is None and self.cache is not None:
            raw = self.cache.get_bytes(f"embed/{_safe(self.provider.tag)}", key)
            if raw is not None:
                hit = np.frombuffer(raw, dtype="<f4").copy()
                self._memory[key] = hit
        return hit

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        keys = [self._key(t) for t in texts]
        missing: Dict[str, str] = {}
        for t, k in zip(texts, keys):
            if k not in missing and self._lookup(k) is None:
                missing[k] = t
        todo = list(missing.items())
        for start in range(0, len(todo), self.batch_size):
            batch = todo[start : start + self.batch_size]
            raw = self._call([t for _, t in batch])
            if raw.ndim != 2 or raw.shape[0] != len(batch):
                raise DimensionMismatch(
                    f"provider returned shape {raw.shape} for {len(batch)} texts"
                )
            with self._lock:
                if self.dim is None:
                    self.dim = raw.shape[1]
                if raw.shape[1] != self.dim:
                    raise DimensionMismatch(f"expected dim {self.dim}, got {raw.shape[1]}")
            rows = _unit_rows(raw)
            for (k, _), row in zip(batch, rows):
                self._memory[k] = row
                if self.cache is not None:
                    self.cache.put_bytes(
                        f"embed/{_safe(self.provider.tag)}", k, row.astype("<f4").tobytes()
                    )
        if not texts:
            return np.zeros((0, self.dim or 0), dtype=np.float32)
        return np.stack([self._memory[k] for k in keys]).astype(np.float32)

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]

    def _call(self, batch: List[str]) -> np.ndarray:
        for attempt in range(self.max_retries + 1):
            try:
                return np.asarray(self.provider.embed(batch), dtype=np.float64)
            except TransientProviderError as exc:
                if attempt == self.max_retries:
                    raise EmbeddingUnavailable(f"embedding failed: {exc}") from exc
                self._sleep(self.backoff * (2**attempt))
        raise AssertionError("unreachable")


def _unit_rows(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return (raw / norms).astype(np.float32)


def _safe(tag: str) -> str:
    return hashlib.sha256(tag.encode("utf-8")).hexdigest()[:16]


def embedder_from_tag(tag: str) -> EmbeddingClient:
    """Rebuild an embedding client from the tag stored in a snapshot."""
    if tag.startswith("mock:"):
        _, dim, seed = tag.split(":")
        return EmbeddingClient(HashEmbeddingProvider(dim=int(dim), seed=int(seed)))
    if tag.startswith("http:"):
        return EmbeddingClient.from_env()
    raise EmbeddingUnavailable(f"cannot rebuild embedding provider {tag!r}")


@dataclass
class Clients:
    """The external clients one run needs; any may be absent."""

    chat: Optional[ChatClient] = None
    embed: Optional[EmbeddingClient] = None
    ledger: TokenLedger = field(default_factory=TokenLedger)
