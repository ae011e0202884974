"""Model provider interfaces: chat, embeddings and duplicate scoring.

Three capabilities sit behind small protocols so the pipeline never knows
whether it is talking to a hosted model or a deterministic mock:

* ``ChatProvider.chat`` turns a :class:`ChatRequest` into completion text.
* ``EmbeddingProvider.embed`` maps texts to fixed-dimension vectors.
* ``DuplicateScorer.score`` rates two questions' redundancy in ``[0, 1]``.

The HTTP implementations retry transient failures (HTTP 429/5xx and
transport errors) with exponential backoff, honor a simple requests-per-
minute rate limit, and treat authentication failures as permanent.
``CachingEmbeddingProvider`` adds a disk cache keyed by model id and
content hash with atomic write-then-rename persistence, so identical
texts are embedded at most once across runs.

The mock implementations are fully deterministic.  ``MockChatProvider``
replays a script keyed by the SHA-256 of the prompt and can fall back to
a caller-supplied responder.  ``MockEmbeddingProvider`` derives a unit
vector from hashes of the text's tokens, which keeps texts with shared
vocabulary close together — near enough to real embedding geometry for
offline runs.  ``MockDuplicateScorer`` uses token-set overlap.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
import requests

from .errors import ContractError, ProviderError, TransportError

logger = logging.getLogger(__name__)

#: Default embedding dimensionality.
DEFAULT_EMBEDDING_DIM = 768

#: Tolerance on the unit-norm invariant for providers that declare it.
UNIT_NORM_TOL = 1e-6

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# HTTP statuses worth retrying; everything else in 4xx is permanent.
_TRANSIENT_STATUSES = frozenset({408, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ChatRequest:
    """One chat completion request.

    ``temperature`` and ``top_p`` default to nucleus-sampling settings
    suited to diverse generation; deterministic judging passes 0.0.
    ``seed`` lets repeated calls with the same prompt ask for different
    (but reproducible) outputs.
    """

    prompt: str
    temperature: float = 0.7
    top_p: float = 0.9
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ContractError("chat prompt must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ContractError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ContractError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens <= 0:
            raise ContractError(f"max_tokens {self.max_tokens} must be positive")


@dataclass(frozen=True)
class EmbeddingVector:
    """A dense embedding with an explicit dimension."""

    dim: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ContractError(f"embedding dim {self.dim} must be positive")
        if len(self.values) != self.dim:
            raise ContractError(
                f"embedding has {len(self.values)} values but declares dim {self.dim}"
            )

    @classmethod
    def from_array(cls, array: np.ndarray) -> "EmbeddingVector":
        flat = np.asarray(array, dtype=float).reshape(-1)
        if not np.all(np.isfinite(flat)):
            raise ContractError("embedding contains non-finite values")
        return cls(dim=flat.size, values=tuple(float(v) for v in flat))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for one provider role."""

    endpoint: str
    model_id: str
    api_key_env: str = ""
    request_timeout: float = 30.0
    max_retries: int = 3
    rate_limit_per_minute: float = 600.0

    def __post_init__(self) -> None:
        if self.request_timeout <= 0:
            raise ContractError("request_timeout must be positive")
        if self.max_retries < 0:
            raise ContractError("max_retries must be >= 0")
        if self.rate_limit_per_minute <= 0:
            raise ContractError("rate_limit_per_minute must be positive")

    def api_key(self) -> str:
        if not self.api_key_env:
            return ""
        return os.environ.get(self.api_key_env, "")


class ChatProvider(Protocol):
    def chat(self, request: ChatRequest) -> str: ...


class EmbeddingProvider(Protocol):
    @property
    def dim(self) -> int: ...

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


class DuplicateScorer(Protocol):
    def score(self, question_a: str, question_b: str) -> float: ...


class RateLimiter:
    """Blocking requests-per-minute limiter (thread-safe, monotonic clock)."""

    def __init__(self, per_minute: float, sleeper: Callable[[float], None] = time.sleep) -> None:
        if per_minute <= 0:
            raise ContractError("rate limit must be positive")
        self._interval = 60.0 / per_minute
        self._sleeper = sleeper
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self._interval
        if wait > 0:
            self._sleeper(wait)


Transport = Callable[[str, dict, dict, float], tuple[int, dict]]


def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, dict]:
    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    try:
        body = response.json()
    except ValueError:
        body = {"raw": response.text}
    return response.status_code, body


class _HttpProviderBase:
    """Shared retry/backoff/rate-limit plumbing for the HTTP providers."""

    def __init__(
        self,
        config: ProviderConfig,
        transport: Transport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        backoff_base: float = 0.5,
        backoff_cap: float = 30.0,
    ) -> None:
        self._config = config
        self._transport = transport or _requests_transport
        self._sleeper = sleeper
        self._backoff_base = backoff_base
        self._backoff_cap = backoff_cap
        self._limiter = RateLimiter(config.rate_limit_per_minute, sleeper=sleeper)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = self._config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, payload: dict) -> dict:
        """POST with retries; raises ProviderError/TransportError when spent."""
        config = self._config
        attempts = config.max_retries + 1
        last_status: int | None = None
        last_exc: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = min(self._backoff_base * 2 ** (attempt - 1), self._backoff_cap)
                self._sleeper(delay)
            self._limiter.acquire()
            try:
                status, body = self._transport(
                    config.endpoint, payload, self._headers(), config.request_timeout
                )
            except (requests.RequestException, OSError) as exc:
                last_exc, last_status = exc, None
                logger.warning(
                    "%s: transport failure (attempt %d/%d): %s",
                    config.endpoint, attempt + 1, attempts, exc,
                )
                continue
            if 200 <= status < 300:
                return body
            if status in _TRANSIENT_STATUSES:
                last_status, last_exc = status, None
                logger.warning(
                    "%s: transient HTTP %d (attempt %d/%d)",
                    config.endpoint, status, attempt + 1, attempts,
                )
                continue
            raise ProviderError(
                f"{config.endpoint}: permanent HTTP {status}: {_brief(body)}",
                status=status,
            )
        if last_status is not None:
            raise ProviderError(
                f"{config.endpoint}: HTTP {last_status} after {attempts} attempts",
                status=last_status,
            )
        raise TransportError(f"{config.endpoint}: unreachable after {attempts} attempts: {last_exc}")


def _brief(body: dict) -> str:
    text = json.dumps(body, sort_keys=True, ensure_ascii=False, default=str)
    return text if len(text) <= 200 else text[:197] + "..."


class HttpChatProvider(_HttpProviderBase):
    """Chat completions over a JSON POST endpoint."""

    def chat(self, request: ChatRequest) -> str:
        payload = {
            "model": self._config.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        body = self._post(payload)
        try:
            return str(body["completion"])
        except (KeyError, TypeError):
            raise ProviderError(
                f"{self._config.endpoint}: malformed chat response: {_brief(body)}"
            ) from None


class HttpEmbeddingProvider(_HttpProviderBase):
    """Batch embeddings over a JSON POST endpoint."""

    def __init__(self, config: ProviderConfig, dim: int = DEFAULT_EMBEDDING_DIM, **kwargs) -> None:
        super().__init__(config, **kwargs)
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ContractError("embed requires at least one text")
        body = self._post({"model": self._config.model_id, "input": list(texts)})
        try:
            rows = [row["embedding"] for row in body["data"]]
        except (KeyError, TypeError):
            raise ProviderError(
                f"{self._config.endpoint}: malformed embedding response: {_brief(body)}"
            ) from None
        if len(rows) != len(texts):
            raise ProviderError(
                f"{self._config.endpoint}: expected {len(texts)} embeddings, got {len(rows)}"
            )
        vectors = [EmbeddingVector.from_array(np.asarray(row, dtype=float)) for row in rows]
        for vector in vectors:
            if vector.dim != self._dim:
                raise ProviderError(
                    f"{self._config.endpoint}: embedding dim {vector.dim} != declared {self._dim}"
                )
        return vectors


class HttpDuplicateScorer(_HttpProviderBase):
    """Question-redundancy scoring over a JSON POST endpoint.

    The pair is ordered canonically before sending so the score is
    symmetric by construction.
    """

    def score(self, question_a: str, question_b: str) -> float:
        if not question_a or not question_b:
            raise ContractError("duplicate scoring requires two non-empty questions")
        first, second = sorted((question_a, question_b))
        body = self._post({"model": self._config.model_id, "pairs": [[first, second]]})
        try:
            value = float(body["scores"][0])
        except (KeyError, TypeError, IndexError, ValueError):
            raise ProviderError(
                f"{self._config.endpoint}: malformed duplicate-score response: {_brief(body)}"
            ) from None
        if not 0.0 <= value <= 1.0:
            raise ProviderError(f"duplicate score {value} outside [0, 1]")
        return value


class CachingEmbeddingProvider:
    """Disk-backed cache in front of another embedding provider.

    Entries are keyed by ``(model_id, sha256(text))`` and persisted one
    file per entry with write-to-temp-then-rename, so a crash can never
    leave a truncated cache entry behind.  Batch order is preserved and
    only cache misses reach the inner provider.
    """

    def __init__(self, inner: EmbeddingProvider, cache_dir: str | Path, model_id: str) -> None:
        self._inner = inner
        self._model_id = model_id
        safe_model = re.sub(r"[^A-Za-z0-9._-]", "_", model_id) or "model"
        self._dir = Path(cache_dir) / safe_model
        self._dir.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, EmbeddingVector] = {}

    @property
    def dim(self) -> int:
        return self._inner.dim

    def _key(self, text: str) -> str:
        digest = hashlib.sha256()
        digest.update(self._model_id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(text.encode("utf-8"))
        return digest.hexdigest()

    def _path(self, key: str) -> Path:
        return self._dir / f"{key}.json"

    def _load(self, key: str) -> EmbeddingVector | None:
        if key in self._memory:
            return self._memory[key]
        path = self._path(key)
        if not path.exists():
            return None
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
            vector = EmbeddingVector(dim=int(raw["dim"]), values=tuple(float(v) for v in raw["values"]))
        except (ValueError, KeyError, TypeError, ContractError):
            logger.warning("discarding unreadable embedding cache entry %s", path)
            return None
        self._memory[key] = vector
        return vector

    def _store(self, key: str, vector: EmbeddingVector) -> None:
        self._memory[key] = vector
        path = self._path(key)
        payload = json.dumps({"dim": vector.dim, "values": list(vector.values)})
        fd, tmp_name = tempfile.mkstemp(dir=self._dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ContractError("embed requires at least one text")
        keys = [self._key(t) for t in texts]
        out: list[EmbeddingVector | None] = [self._load(k) for k in keys]
        misses = [i for i, v in enumerate(out) if v is None]
        if misses:
            fresh = self._inner.embed([texts[i] for i in misses])
            for i, vector in zip(misses, fresh):
                self._store(keys[i], vector)
                out[i] = vector
        result = [v for v in out if v is not None]
        dims = {v.dim for v in result}
        if len(dims) > 1:
            raise ProviderError(f"mixed embedding dimensions in one batch: {sorted(dims)}")
        return result


def prompt_key(prompt: str) -> str:
    """Stable script key for mock chat: SHA-256 hex digest of the prompt."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class MockChatProvider:
    """Deterministic scripted chat for offline runs and tests.

    Responses are looked up by :func:`prompt_key`.  Unscripted prompts go
    to ``responder`` when one is provided; otherwise they raise
    :class:`ProviderError` so tests notice missing fixtures immediately.
    Every request is recorded on ``calls`` for assertions.
    """

    script: Mapping[str, str] = field(default_factory=dict)
    responder: Callable[[ChatRequest], str] | None = None
    calls: list[ChatRequest] = field(default_factory=list)

    @classmethod
    def from_prompts(cls, pairs: Mapping[str, str], **kwargs) -> "MockChatProvider":
        """Build a provider from literal ``{prompt: response}`` pairs."""
        return cls(script={prompt_key(p): r for p, r in pairs.items()}, **kwargs)

    def chat(self, request: ChatRequest) -> str:
        self.calls.append(request)
        key = prompt_key(request.prompt)
        if key in self.script:
            return self.script[key]
        if self.responder is not None:
            return self.responder(request)
        raise ProviderError(f"mock chat has no script for prompt starting {request.prompt[:60]!r}")


class MockEmbeddingProvider:
    """Deterministic embeddings derived from content hashes.

    Each lowercase alphanumeric token maps to a pseudo-random unit-scale
    vector seeded by the token's SHA-256; a text embeds as the normalized
    sum of its token vectors (falling back to a whole-text hash vector for
    token-free input).  Identical texts therefore always embed identically,
    and texts sharing vocabulary land near each other, giving offline runs
    realistic clustering and retrieval behavior.
    """

    unit_norm = True

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM) -> None:
        if dim <= 0:
            raise ContractError("embedding dim must be positive")
        self._dim = dim
        self._token_cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self._dim

    def _hash_vector(self, seed_text: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(seed_text.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self._dim)

    def _token_vector(self, token: str) -> np.ndarray:
        vector = self._token_cache.get(token)
        if vector is None:
            vector = self._hash_vector("token\x00" + token)
            self._token_cache[token] = vector
        return vector

    def _embed_one(self, text: str) -> EmbeddingVector:
        tokens = _TOKEN_RE.findall(text.lower())
        if tokens:
            total = np.zeros(self._dim)
            for token in tokens:
                total += self._token_vector(token)
        else:
            total = self._hash_vector("text\x00" + text)
        norm = float(np.linalg.norm(total))
        if norm == 0.0:  # pragma: no cover - astronomically unlikely
            total = self._hash_vector("fallback\x00" + text)
            norm = float(np.linalg.norm(total))
        return EmbeddingVector.from_array(total / norm)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ContractError("embed requires at least one text")
        return [self._embed_one(t) for t in texts]


class MockDuplicateScorer:
    """Token-set overlap (Jaccard) as a stand-in redundancy score."""

    def score(self, question_a: str, question_b: str) -> float:
        if not question_a or not question_b:
            raise ContractError("duplicate scoring requires two non-empty questions")
        tokens_a = set(_TOKEN_RE.findall(question_a.lower()))
        tokens_b = set(_TOKEN_RE.findall(question_b.lower()))
        if not tokens_a and not tokens_b:
            return 1.0
        if not tokens_a or not tokens_b:
            return 0.0
        return len(tokens_a & tokens_b) / len(tokens_a | tokens_b)
