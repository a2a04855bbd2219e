"""Text normalization and deterministic embeddings.

Two embedders are provided: a local hashed n-gram embedder whose output is
bit-stable across runs, and a client for a remote embedding service. Both
return unit-length float32 vectors.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    BatchItemError,
    DimensionMismatch,
    EmptyText,
    MalformedResponse,
    ServiceUnavailable,
    ZeroVector,
)

logger = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_MSB64 = 1 << 63

_WS = re.compile(r"\s+")

Embedding = np.ndarray


def normalize_text(raw: str) -> str:
    """Lowercase, collapse whitespace runs to one space and trim.

    Digits and punctuation are kept as-is: sizes such as ``1/8 x 4''`` are
    what tell two otherwise identical products apart.
    """
    text = _WS.sub(" ", raw.lower()).strip()
    if not text:
        raise EmptyText(f"description {raw!r} is empty after normalization")
    return text


@lru_cache(maxsize=1 << 18)
def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EmbedderConfig:
    dim: int = 512
    char_ngram_sizes: frozenset[int] = field(default_factory=lambda: frozenset({3, 4, 5}))
    include_word_unigrams: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "char_ngram_sizes", frozenset(self.char_ngram_sizes))
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")
        if any(n < 2 for n in self.char_ngram_sizes):
            raise ValueError(f"n-gram sizes must be >= 2, got {sorted(self.char_ngram_sizes)}")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "char_ngram_sizes": sorted(self.char_ngram_sizes),
            "include_word_unigrams": self.include_word_unigrams,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmbedderConfig":
        return cls(
            dim=int(data["dim"]),
            char_ngram_sizes=frozenset(int(n) for n in data["char_ngram_sizes"]),
            include_word_unigrams=bool(data["include_word_unigrams"]),
        )


def extract_features(text: str, cfg: EmbedderConfig) -> list[str]:
    """Every feature occurrence of ``text``: word unigrams, then char n-grams by size."""
    feats: list[str] = []
    if cfg.include_word_unigrams:
        feats.extend(text.split(" "))
    for n in sorted(cfg.char_ngram_sizes):
        feats.extend(text[i : i + n] for i in range(len(text) - n + 1))
    return feats


def embed_hash(text: str, cfg: EmbedderConfig | None = None) -> Embedding:
    """Signed feature hashing into ``cfg.dim`` buckets, then L2 normalization."""
    cfg = cfg or EmbedderConfig()
    if not text:
        raise EmptyText("cannot embed empty text")
    feats = extract_features(text, cfg)
    if not feats:
        raise EmptyText(f"no features extractable from {text!r}")
    acc = np.zeros(cfg.dim, dtype=np.float64)
    for feat in feats:
        h = fnv1a_64(feat.encode("utf-8"))
        acc[h % cfg.dim] += -1.0 if h & _MSB64 else 1.0
    norm = float(np.sqrt(np.dot(acc, acc)))
    if norm == 0.0:
        raise ZeroVector(f"hashed features of {text!r} cancel to zero")
    return (acc / norm).astype(np.float32)


def embed_batch(texts: Sequence[str], cfg: EmbedderConfig | None = None) -> list[Embedding]:
    out = []
    for pos, text in enumerate(texts):
        try:
            out.append(embed_hash(text, cfg))
        except (EmptyText, ZeroVector) as exc:
            raise BatchItemError(pos, exc) from exc
    return out


def unit_normalize(vec: np.ndarray) -> tuple[np.ndarray, bool]:
    """Return ``(unit_vec, changed)``; ``changed`` is False if already unit within 1e-6."""
    vec = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroVector("service returned an all-zero embedding")
    if abs(norm - 1.0) <= 1e-6:
        return vec.astype(np.float32), False
    return (vec / norm).astype(np.float32), True


class RemoteEmbedder:
    """Client for an HTTP embedding service.

    Speaks ``POST {endpoint}/v1/embed`` with ``{"texts": [...]}`` and expects
    ``{"dim": d, "embeddings": [[...], ...]}`` back. Inputs longer than
    ``max_batch`` are split into several requests.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        timeout: float = 30.0,
        max_batch: int = 64,
        attempts: int = 3,
        backoff: float = 1.0,
        transport=None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        import httpx

        if max_batch < 1:
            raise ValueError("max_batch must be positive")
        self.endpoint = endpoint.rstrip("/")
        self.max_batch = max_batch
        self.attempts = attempts
        self.backoff = backoff
        self.dim: int | None = None
        self.renormalized = 0
        self._sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteEmbedder":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, texts: list[str]) -> dict:
        import httpx

        url = f"{self.endpoint}/v1/embed"
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(url, json={"texts": texts})
            except httpx.HTTPError as exc:
                last = exc
                logger.warning("embed request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise MalformedResponse(f"response is not JSON: {exc}") from exc
            last = RuntimeError(f"HTTP {resp.status_code}")
            logger.warning("embed request got HTTP %d (attempt %d)", resp.status_code, attempt + 1)
        raise ServiceUnavailable(f"{url} failed after {self.attempts} attempts: {last}")

    def _parse(self, body: dict, n: int) -> list[Embedding]:
        if not isinstance(body, dict) or "dim" not in body or "embeddings" not in body:
            raise MalformedResponse("response must carry 'dim' and 'embeddings'")
        dim, rows = body["dim"], body["embeddings"]
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise MalformedResponse(f"bad dim {dim!r}")
        if not isinstance(rows, list) or len(rows) != n:
            got = len(rows) if isinstance(rows, list) else type(rows).__name__
            raise MalformedResponse(f"expected {n} embeddings, got {got}")
        if self.dim is not None and dim != self.dim:
            raise DimensionMismatch(f"service dim changed from {self.dim} to {dim}")
        out = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim:
                raise MalformedResponse(f"embedding {i} does not have length {dim}")
            try:
                arr = np.asarray(row, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise MalformedResponse(f"embedding {i} is not numeric") from exc
            if not np.all(np.isfinite(arr)):
                raise MalformedResponse(f"embedding {i} has non-finite values")
            vec, changed = unit_normalize(arr)
            self.renormalized += changed
            out.append(vec)
        self.dim = dim
        return out

    def __call__(self, text: str) -> Embedding:
        return self.embed([text])[0]

    def embed(self, texts: Sequence[str]) -> list[Embedding]:
        texts = list(texts)
        out: list[Embedding] = []
        for start in range(0, len(texts), self.max_batch):
            chunk = texts[start : start + self.max_batch]
            out.extend(self._parse(self._post(chunk), len(chunk)))
        return out


def embed_remote(texts: Sequence[str], endpoint: str, **kwargs) -> list[Embedding]:
    with RemoteEmbedder(endpoint, **kwargs) as client:
        return client.embed(texts)


class HashEmbedder:
    """Callable wrapper so local and remote embedders share one interface."""

    def __init__(self, cfg: EmbedderConfig | None = None) -> None:
        self.cfg = cfg or EmbedderConfig()

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def __call__(self, text: str) -> Embedding:
        return embed_hash(text, self.cfg)

    def embed(self, texts: Iterable[str]) -> list[Embedding]:
        return embed_batch(list(texts), self.cfg)
