"""Descriptive sentences and the two entity embedding strategies.

Every entity is rendered into five prefixed sentences (title, field,
content, incoming references, outgoing references). Strategy 1 embeds
their concatenation; strategy 2 embeds each sentence separately and takes
a weighted sum. Both yield unit vectors in a 384-dimensional space.
"""

from __future__ import annotations

import hashlib
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
import requests

from .errors import BackendUnavailableError, DegenerateVectorError
from .kg import Entity

EMBED_DIM = 384
SENTENCE_TRUNCATION = 4096

# sentence slots in Eq-order: s1..s5
SENTENCE_SLOTS = ("title", "field", "content", "in_refs", "out_refs")

DEFAULT_WEIGHTS: tuple[float, ...] = (0.5, 0.3, 0.1, 0.05, 0.05)

STRATEGY_1 = "strategy1"
STRATEGY_2 = "strategy2"

__all__ = [
    "DEFAULT_WEIGHTS",
    "EMBED_DIM",
    "DescriptiveSentences",
    "Embedder",
    "HashEmbedder",
    "HttpEmbedder",
    "SENTENCE_SLOTS",
    "SENTENCE_TRUNCATION",
    "STRATEGY_1",
    "STRATEGY_2",
    "SentenceMask",
    "build_sentences",
    "embed_strategy1",
    "embed_strategy2",
    "hash_embed",
    "normalize_vector",
    "validate_weights",
]


@dataclass(frozen=True)
class SentenceMask:
    """Which of the five sentences participate in an embedding."""

    included: frozenset[str]

    def __post_init__(self) -> None:
        unknown = self.included - set(SENTENCE_SLOTS)
        if unknown:
            raise ValueError(f"unknown sentence slots: {sorted(unknown)}")
        if not self.included:
            raise ValueError("a sentence mask must include at least one slot")

    @classmethod
    def full(cls) -> "SentenceMask":
        return cls(frozenset(SENTENCE_SLOTS))

    @classmethod
    def of(cls, *slots: str) -> "SentenceMask":
        return cls(frozenset(slots))

    def includes(self, slot: str) -> bool:
        return slot in self.included

    def bits(self) -> int:
        return sum(1 << i for i, slot in enumerate(SENTENCE_SLOTS) if self.includes(slot))

    @classmethod
    def from_bits(cls, bits: int) -> "SentenceMask":
        return cls(
            frozenset(
                slot for i, slot in enumerate(SENTENCE_SLOTS) if bits & (1 << i)
            )
        )


@dataclass(frozen=True)
class DescriptiveSentences:
    """The five prefixed sentences; masked-out slots are empty strings."""

    title: str
    field: str
    content: str
    in_refs: str
    out_refs: str

    def as_tuple(self) -> tuple[str, str, str, str, str]:
        return (self.title, self.field, self.content, self.in_refs, self.out_refs)


def _refs_sentence(prefix: str, refs) -> str:
    entries = sorted(refs.items(), key=lambda kv: kv[0])
    return prefix + "; ".join(f"{title} ({tactic.value})" for title, tactic in entries)


def _bare_sentence(slot: str) -> str:
    return {
        "title": "title: ",
        "field": "field: ",
        "content": "content: ",
        "in_refs": "in references: ",
        "out_refs": "out references: ",
    }[slot]


def build_sentences(entity: Entity, mask: SentenceMask | None = None) -> DescriptiveSentences:
    """The five descriptive sentences of an entity, truncated per sentence."""
    mask = mask or SentenceMask.full()
    raw = {
        "title": "title: " + entity.title,
        "field": "field: " + (entity.field.value if entity.field is not None else ""),
        "content": "content: " + " ".join(entity.contents),
        "in_refs": _refs_sentence("in references: ", entity.in_refs),
        "out_refs": _refs_sentence("out references: ", entity.out_refs),
    }
    values = {
        slot: (raw[slot][:SENTENCE_TRUNCATION] if mask.includes(slot) else "")
        for slot in SENTENCE_SLOTS
    }
    return DescriptiveSentences(**values)


def normalize_vector(vec: np.ndarray) -> np.ndarray:
    """L2-normalize; vectors of (near-)zero norm cannot be embedded."""
    vec = np.asarray(vec, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise DegenerateVectorError("vector has non-finite components")
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        raise DegenerateVectorError(f"vector norm {norm} is below 1e-12")
    return vec / norm


def validate_weights(weights) -> tuple[float, ...]:
    w = tuple(float(x) for x in weights)
    if len(w) != len(SENTENCE_SLOTS):
        raise ValueError(f"need {len(SENTENCE_SLOTS)} weights, got {len(w)}")
    if any(x < 0 for x in w):
        raise ValueError("weights must be non-negative")
    if abs(sum(w) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {sum(w)}")
    return w


class Embedder(ABC):
    """Text-to-vector contract: 384 finite floats per text."""

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        """Embed one text. Raises DegenerateVectorError on unembeddable input."""

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        return [self.embed_text(t) for t in texts]


def hash_embed(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Deterministic offline embedding: hashed bag of words with signs.

    Each lowercase word token adds +-1 (sign from the top hash bit) at
    index ``hash(token) mod dim`` under a fixed 64-bit hash; the result is
    L2-normalized. Textless input raises DegenerateVectorError.
    """
    tokens = re.findall(r"\w+", text.lower())
    if not tokens:
        raise DegenerateVectorError("no word tokens to embed")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        h = int.from_bytes(digest, "big")
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    return normalize_vector(vec)


class HashEmbedder(Embedder):
    """Offline embedder used for tests and air-gapped runs."""

    def __init__(self, dim: int = EMBED_DIM) -> None:
        self.dim = dim

    def embed_text(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim)


class HttpEmbedder(Embedder):
    """Client for the remote embedding endpoint (POST /v1/embed)."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        batch_size: int = 32,
        dim: int = EMBED_DIM,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.batch_size = max(1, batch_size)
        self.dim = dim
        self.session = session or requests.Session()

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        vectors: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            chunk = texts[start : start + self.batch_size]
            try:
                response = self.session.post(
                    f"{self.base_url}/v1/embed",
                    json={"texts": chunk},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                raise BackendUnavailableError(f"embedder unreachable: {exc}") from exc
            if response.status_code != 200:
                raise BackendUnavailableError(
                    f"embedder returned HTTP {response.status_code}"
                )
            try:
                body = response.json()
            except ValueError as exc:
                raise BackendUnavailableError("embedder sent non-JSON body") from exc
            rows = body.get("vectors") if isinstance(body, dict) else None
            if not isinstance(rows, list) or len(rows) != len(chunk):
                raise BackendUnavailableError("embedder response shape mismatch")
            for row in rows:
                vec = np.asarray(row, dtype=np.float64)
                if vec.shape != (self.dim,) or not np.all(np.isfinite(vec)):
                    raise BackendUnavailableError(
                        "embedder returned a malformed vector"
                    )
                vectors.append(vec)
        return vectors


def embed_strategy1(
    entity: Entity,
    embedder: Embedder,
    mask: SentenceMask | None = None,
) -> np.ndarray:
    """Embed the concatenation of the masked-in sentences (strategy 1)."""
    mask = mask or SentenceMask.full()
    sentences = build_sentences(entity, mask)
    parts = [
        sentence
        for slot, sentence in zip(SENTENCE_SLOTS, sentences.as_tuple())
        if mask.includes(slot)
    ]
    return normalize_vector(embedder.embed_text(" ".join(parts)))


def embed_strategy2(
    entity: Entity,
    embedder: Embedder,
    weights=DEFAULT_WEIGHTS,
    mask: SentenceMask | None = None,
    masked: str = "zero",
) -> np.ndarray:
    """Weighted sum of per-sentence embeddings (strategy 2), normalized.

    ``masked="zero"`` drops masked-out sentences from the sum (their weight
    becomes 0); ``masked="prefix"`` embeds their bare prefix instead.
    """
    if masked not in ("zero", "prefix"):
        raise ValueError(f"unknown masked mode {masked!r}")
    mask = mask or SentenceMask.full()
    w = validate_weights(weights)
    sentences = build_sentences(entity, mask)
    acc: np.ndarray | None = None
    for weight, slot, sentence in zip(w, SENTENCE_SLOTS, sentences.as_tuple()):
        if weight == 0.0:
            continue
        if not mask.includes(slot):
            if masked == "zero":
                continue
            sentence = _bare_sentence(slot)
        term = weight * np.asarray(embedder.embed_text(sentence), dtype=np.float64)
        acc = term if acc is None else acc + term
    if acc is None:
        raise DegenerateVectorError("all sentences are masked out or zero-weighted")
    return normalize_vector(acc)
