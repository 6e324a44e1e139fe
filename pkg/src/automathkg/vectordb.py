"""In-memory cosine vector index with a checksummed binary file format."""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .embedding import (
    DEFAULT_WEIGHTS,
    EMBED_DIM,
    STRATEGY_1,
    STRATEGY_2,
    Embedder,
    SentenceMask,
    embed_strategy1,
    embed_strategy2,
    normalize_vector,
    validate_weights,
)
from .errors import (
    ChecksumMismatchError,
    DegenerateVectorError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    MalformedFileError,
)
from .kg import KnowledgeGraph

logger = logging.getLogger(__name__)

FILE_MAGIC = b"AMVD"
FILE_VERSION = 1

__all__ = [
    "FILE_MAGIC",
    "FILE_VERSION",
    "SearchHit",
    "VectorDb",
    "build_vd",
    "cosine",
    "embed_for_db",
    "load_vd",
    "save_vd",
]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two vectors of equal dimension."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"shapes {u.shape} and {v.shape} differ")
    return float(np.dot(normalize_vector(u), normalize_vector(v)))


@dataclass(frozen=True)
class SearchHit:
    entity_id: int
    score: float


@dataclass
class VectorDb:
    """Exact cosine nearest-neighbour index over entity vectors.

    Vectors are stored unit-normalized in float64; the file format
    quantizes them to float32. Metadata records how the vectors were
    produced so a query can be embedded the same way.
    """

    dim: int = EMBED_DIM
    strategy_tag: str = STRATEGY_1
    weights: tuple[float, ...] | None = None
    mask: SentenceMask = dc_field(default_factory=SentenceMask.full)
    records: dict[int, np.ndarray] = dc_field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, entity_id: int) -> bool:
        return entity_id in self.records

    def vector(self, entity_id: int) -> np.ndarray:
        return self.records[entity_id]

    def insert(self, entity_id: int, vector: np.ndarray) -> None:
        """Insert a vector under an id; normalizes and validates it."""
        if entity_id in self.records:
            raise DuplicateIdError(f"vector for entity {entity_id} already present")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected dimension {self.dim}, got shape {vec.shape}"
            )
        self.records[int(entity_id)] = normalize_vector(vec)

    def remove(self, entity_id: int) -> None:
        self.records.pop(entity_id, None)

    def top_k(
        self,
        query: np.ndarray,
        k: int,
        exclude: frozenset[int] | set[int] = frozenset(),
    ) -> list[SearchHit]:
        """The k nearest ids by cosine, score descending then id ascending."""
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected dimension {self.dim}, got shape {q.shape}"
            )
        q = normalize_vector(q)
        pool = [eid for eid in self.records if eid not in exclude]
        if not pool:
            raise EmptyIndexError("no vectors to search after exclusion")
        hits = [
            SearchHit(eid, float(np.dot(self.records[eid], q))) for eid in pool
        ]
        hits.sort(key=lambda h: (-h.score, h.entity_id))
        return hits[: min(k, len(hits))]


def build_vd(
    kg: KnowledgeGraph,
    embedder: Embedder,
    strategy: str = STRATEGY_1,
    weights=None,
    mask: SentenceMask | None = None,
) -> tuple[VectorDb, list[int]]:
    """Embed every entity of a graph into a fresh index.

    Entities whose embedding degenerates are skipped (logged and returned
    as the second element); transport failures of a remote embedder abort
    the build.
    """
    mask = mask or SentenceMask.full()
    if strategy == STRATEGY_1:
        if weights is not None:
            raise ValueError("strategy1 takes no weights")
        stored_weights = None
    elif strategy == STRATEGY_2:
        stored_weights = validate_weights(
            weights if weights is not None else DEFAULT_WEIGHTS
        )
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    db = VectorDb(strategy_tag=strategy, weights=stored_weights, mask=mask)
    failed: list[int] = []
    for entity in kg.iter_entities():
        try:
            if strategy == STRATEGY_1:
                vec = embed_strategy1(entity, embedder, mask)
            else:
                vec = embed_strategy2(entity, embedder, stored_weights, mask)
        except DegenerateVectorError as exc:
            logger.warning("entity %d could not be embedded: %s", entity.id, exc)
            failed.append(entity.id)
            continue
        db.insert(entity.id, vec)
    return db, failed


def embed_for_db(db: VectorDb, embedder: Embedder, entity) -> np.ndarray:
    """Embed an entity with the same recipe a db's vectors were built with."""
    if db.strategy_tag == STRATEGY_1:
        return embed_strategy1(entity, embedder, db.mask)
    if db.strategy_tag == STRATEGY_2:
        weights = db.weights if db.weights is not None else DEFAULT_WEIGHTS
        return embed_strategy2(entity, embedder, weights, db.mask)
    raise ValueError(f"db strategy {db.strategy_tag!r} is not entity-embeddable")


def save_vd(db: VectorDb, path: str | Path) -> None:
    """Write the index to its binary format (little-endian, CRC-trailed)."""
    tag = db.strategy_tag.encode("utf-8")
    out = bytearray()
    out += FILE_MAGIC
    out += struct.pack("<HHI", FILE_VERSION, db.dim, len(db.records))
    out += struct.pack("<H", len(tag))
    out += tag
    if db.weights is None:
        out += struct.pack("<B", 0)
    else:
        out += struct.pack("<B", 1)
        out += struct.pack("<5d", *db.weights)
    out += struct.pack("<B", db.mask.bits())
    for entity_id in sorted(db.records):
        out += struct.pack("<Q", entity_id)
        out += db.records[entity_id].astype(np.float32).tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    Path(path).write_bytes(bytes(out))


class _Cursor:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedFileError("file truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_vd(path: str | Path) -> VectorDb:
    """Read an index from its binary format, verifying the checksum."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise MalformedFileError("file shorter than its checksum")
    body, (stored_crc,) = data[:-4], struct.unpack("<I", data[-4:])
    actual_crc = zlib.crc32(body)
    if actual_crc != stored_crc:
        raise ChecksumMismatchError(
            f"checksum {stored_crc:#010x} does not match content {actual_crc:#010x}"
        )
    cur = _Cursor(body)
    if cur.take(4) != FILE_MAGIC:
        raise MalformedFileError("bad magic")
    version, dim, count = cur.unpack("<HHI")
    if version != FILE_VERSION:
        raise MalformedFileError(f"unsupported file version {version}")
    if dim < 1:
        raise MalformedFileError("dimension must be positive")
    (tag_len,) = cur.unpack("<H")
    try:
        tag = cur.take(tag_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFileError("strategy tag is not UTF-8") from exc
    (weight_flag,) = cur.unpack("<B")
    if weight_flag not in (0, 1):
        raise MalformedFileError(f"bad weight flag {weight_flag}")
    weights = None
    if weight_flag == 1:
        weights = tuple(cur.unpack("<5d"))
    (mask_bits,) = cur.unpack("<B")
    try:
        mask = SentenceMask.from_bits(mask_bits)
    except ValueError as exc:
        raise MalformedFileError(f"bad sentence mask bits {mask_bits:#x}") from exc
    db = VectorDb(dim=dim, strategy_tag=tag, weights=weights, mask=mask)
    for _ in range(count):
        (entity_id,) = cur.unpack("<Q")
        raw = cur.take(4 * dim)
        vec = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if entity_id in db.records:
            raise MalformedFileError(f"duplicate entity id {entity_id}")
        db.records[int(entity_id)] = vec
    if cur.pos != len(body):
        raise MalformedFileError(f"{len(body) - cur.pos} trailing bytes")
    return db
