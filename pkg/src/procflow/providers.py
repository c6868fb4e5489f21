"""Chat, vision, and embedding provider interfaces.

All embeddings are L2-normalized at this boundary, so downstream code may
treat cosine similarity as a plain dot product. Deterministic mock
implementations back the test suite and the mock pipeline; HTTP providers
talk a generic JSON shape with retry/backoff and a flat-file response cache.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from .errors import ProviderError, ValidationError
from .text import tokenize

UNIT_NORM_TOL = 1e-6


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    backoff_base_s: float = 0.5

    def delays(self) -> list[float]:
        """Sleep before attempt i+2; monotone non-decreasing."""
        return [self.backoff_base_s * (2**i) for i in range(self.max_attempts - 1)]


@dataclass
class ProviderConfig:
    endpoint: str = ""
    model: str = ""
    auth_env: str = ""  # name of the env var holding the token, never the token
    temperature: float = 0.0
    max_in_flight: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    cache_dir: str | None = None

    def __post_init__(self):
        if self.retry.max_attempts < 1:
            raise ValidationError("retry max_attempts must be >= 1")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")


def normalize(vector: Sequence[float]) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValidationError("cannot normalize a zero vector")
    return v / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit-norm vectors of equal dimension."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cosine similarity, clamped into [0, 2]."""
    return min(2.0, max(0.0, 1.0 - cosine_similarity(a, b)))


class EmbeddingProvider(Protocol):
    dimension: int

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class ChatProvider(Protocol):
    def chat_complete(self, prompt: str) -> str: ...


class VisionProvider(Protocol):
    def vision_analyze(self, frames: Sequence[str], prompt: str) -> str: ...


def _check_texts(texts: Sequence[str]) -> None:
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t:
            raise ValidationError(f"embedding input {i} is empty")


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")


class HashEmbeddingProvider:
    """Deterministic mock: hashed bag-of-tokens, L2-normalized.

    Identical inputs map to identical vectors; texts with disjoint token
    hash buckets are orthogonal.
    """

    def __init__(self, dimension: int = 64):
        self.dimension = dimension

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        out = []
        for text in texts:
            v = np.zeros(self.dimension, dtype=np.float64)
            for token in tokenize(text) or [text.lower()]:
                v[_stable_hash(token) % self.dimension] += 1.0
            out.append(normalize(v))
        return out


class ScriptedEmbeddingProvider:
    """Mock with hand-set vectors per exact input text."""

    def __init__(self, vectors: dict[str, Sequence[float]]):
        self._vectors = {k: normalize(v) for k, v in vectors.items()}
        dims = {v.shape[0] for v in self._vectors.values()}
        if len(dims) > 1:
            raise ValidationError("scripted embeddings must share one dimension")
        self.dimension = dims.pop() if dims else 0

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        try:
            return [self._vectors[t] for t in texts]
        except KeyError as exc:
            raise ProviderError(f"no scripted embedding for {exc.args[0]!r}") from exc


class ScriptedChatProvider:
    """Mock keyed by prompt substring; first matching rule wins.

    A rule value may be a string or a list of strings consumed in order
    (for retry fixtures).
    """

    def __init__(self, rules: dict[str, str | list[str]], default: str | None = None):
        self._rules = {k: list(v) if isinstance(v, list) else [v] for k, v in rules.items()}
        self._default = default
        self.calls: list[str] = []

    def chat_complete(self, prompt: str) -> str:
        if not prompt:
            raise ValidationError("prompt must be nonempty")
        self.calls.append(prompt)
        for key, responses in self._rules.items():
            if key in prompt:
                return responses.pop(0) if len(responses) > 1 else responses[0]
        if self._default is not None:
            return self._default
        raise ProviderError(f"no scripted response matches prompt: {prompt[:80]!r}")


class ScriptedVisionProvider(ScriptedChatProvider):
    """Vision mock: same substring rules, frames must resolve."""

    def vision_analyze(self, frames: Sequence[str], prompt: str) -> str:
        if not frames:
            raise ValidationError("vision call requires at least one frame")
        return self.chat_complete(prompt)


class _InFlightGate:
    """Counting gate limiting concurrent provider calls."""

    def __init__(self, limit: int):
        self._sem = threading.BoundedSemaphore(max(1, limit))

    def __enter__(self):
        self._sem.acquire()
        return self

    def __exit__(self, *exc):
        self._sem.release()
        return False


class ResponseCache:
    """Flat-file response cache keyed by content hash.

    Files are written to a temp name then renamed, so a crash never leaves
    a half-written entry behind.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(endpoint: str, prompt: str, temperature: float, extra: str = "") -> str:
        prompt_hash = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        raw = f"{endpoint}\n{prompt_hash}\n{temperature!r}\n{extra}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def get(self, key: str) -> str | None:
        path = self.directory / f"{key}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["response"]

    def put(self, key: str, response: str) -> None:
        path = self.directory / f"{key}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"response": response}, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


def _with_retries(policy: RetryPolicy, call: Callable[[], str], sleep=time.sleep) -> tuple[str, int]:
    """Run ``call`` under the retry policy; returns (result, attempts used)."""
    attempts: list[str] = []
    delays = policy.delays()
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return call(), attempt
        except Exception as exc:  # noqa: BLE001 - transport errors vary by backend
            attempts.append(f"attempt {attempt}: {exc}")
            if attempt < policy.max_attempts:
                sleep(delays[attempt - 1])
    raise ProviderError("provider call failed after retries", attempts=attempts)


class HttpProvider:
    """Generic JSON-over-HTTP provider: ``{model, prompt, frames?, temperature}``.

    Secrets come only from the environment variable named in the config.
    Responses are cached by (endpoint, prompt hash, temperature) when a
    cache directory is configured.
    """

    def __init__(self, config: ProviderConfig, transport: Callable[[dict], str] | None = None,
                 sleep=time.sleep):
        self.config = config
        self._gate = _InFlightGate(config.max_in_flight)
        self._cache = ResponseCache(config.cache_dir) if config.cache_dir else None
        self._transport = transport or self._http_post
        self._sleep = sleep

    def _http_post(self, payload: dict) -> str:
        headers = {}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env)
            if not token:
                raise ProviderError(f"environment variable {self.config.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        resp = requests.post(self.config.endpoint, json=payload, headers=headers, timeout=120)
        resp.raise_for_status()
        return resp.json()["text"]

    def _request(self, prompt: str, frames: Sequence[str] | None = None) -> str:
        if not prompt:
            raise ValidationError("prompt must be nonempty")
        extra = "|".join(frames) if frames else ""
        key = ResponseCache.key(self.config.endpoint, prompt, self.config.temperature, extra)
        if self._cache is not None:
            cached = self._cache.get(key)
            if cached is not None:
                return cached
        payload = {
            "model": self.config.model,
            "prompt": prompt,
            "temperature": self.config.temperature,
        }
        if frames is not None:
            payload["frames"] = list(frames)

        def call() -> str:
            with self._gate:
                return self._transport(payload)

        response, _ = _with_retries(self.config.retry, call, sleep=self._sleep)
        if self._cache is not None:
            self._cache.put(key, response)
        return response

    def chat_complete(self, prompt: str) -> str:
        return self._request(prompt)

    def vision_analyze(self, frames: Sequence[str], prompt: str) -> str:
        if not frames:
            raise ValidationError("vision call requires at least one frame")
        for ref in frames:
            if not str(ref):
                raise ValidationError("frame reference must be nonempty")
        return self._request(prompt, frames=frames)


class HttpEmbeddingProvider(HttpProvider):
    """Embedding adapter over the same transport: one prompt per text.

    The remote response is a JSON list of floats; vectors are normalized
    here so consumers always see unit norm.
    """

    def __init__(self, config: ProviderConfig, dimension: int,
                 transport: Callable[[dict], str] | None = None, sleep=time.sleep):
        super().__init__(config, transport=transport, sleep=sleep)
        self.dimension = dimension

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        out = []
        for text in texts:
            raw = self._request(text)
            vector = normalize(json.loads(raw))
            if vector.shape[0] != self.dimension:
                raise ProviderError(
                    f"embedding dimension {vector.shape[0]} != expected {self.dimension}"
                )
            out.append(vector)
        return out
