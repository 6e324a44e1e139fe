"""Quantitative evaluation: reachability hit rates, precision, K-S, TransE."""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    EmptyTriplesError,
    InsufficientEntitiesError,
    MissingVectorError,
)
from .kg import EntityType, KnowledgeGraph, TacticLabel
from .kg.graph import Direction
from .vectordb import VectorDb

DEFAULT_SAMPLE_COUNTS = {
    EntityType.DEFINITION: 50,
    EntityType.THEOREM: 30,
    EntityType.PROBLEM: 20,
}

__all__ = [
    "DEFAULT_SAMPLE_COUNTS",
    "HitsDetail",
    "HitsResult",
    "PrecisionSample",
    "PrecisionSummary",
    "ReachEvalConfig",
    "Triple",
    "TranseConfig",
    "TranseResult",
    "hits_at_q",
    "hits_csv",
    "ks_statistic",
    "precision",
    "sample_entities",
    "transe_to_vd",
    "transe_train",
    "triples_from_kg",
]


@dataclass(frozen=True)
class ReachEvalConfig:
    """Parameters of one reachability evaluation run."""

    k: int = 5
    q_values: tuple[int, ...] = (1, 5, 10, 15)
    direction: Direction = "either"
    sample_counts: dict = dc_field(
        default_factory=lambda: dict(DEFAULT_SAMPLE_COUNTS)
    )
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.q_values:
            raise ValueError("q_values must be nonempty")


@dataclass(frozen=True)
class HitsDetail:
    """Per-sample outcome: r of the q retrieved entities were reachable."""

    entity_id: int
    q: int
    r: int


@dataclass
class HitsResult:
    """Hit rates per q plus the per-sample (r, q) details."""

    rates: dict[int, float] = dc_field(default_factory=dict)
    details: list[HitsDetail] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rates": {str(q): rate for q, rate in sorted(self.rates.items())},
            "details": [
                {"entity_id": d.entity_id, "q": d.q, "r": d.r} for d in self.details
            ],
        }


def hits_csv(result: HitsResult) -> str:
    """Flat (q, rate) CSV for plotting."""
    lines = ["q,rate"]
    lines += [f"{q},{rate}" for q, rate in sorted(result.rates.items())]
    return "\n".join(lines) + "\n"


def sample_entities(kg: KnowledgeGraph, counts: dict, seed: int) -> list[int]:
    """Stratified without-replacement sample of entity ids, type by type."""
    rng = random.Random(seed)
    sampled: list[int] = []
    by_type: dict[EntityType, list[int]] = {t: [] for t in EntityType}
    for entity in kg.iter_entities():
        by_type[entity.type].append(entity.id)
    for entity_type in EntityType:
        wanted = int(counts.get(entity_type, 0))
        if wanted == 0:
            continue
        population = by_type[entity_type]
        if wanted > len(population):
            raise InsufficientEntitiesError(entity_type.value, wanted, len(population))
        sampled.extend(rng.sample(population, wanted))
    return sampled


def hits_at_q(
    kg: KnowledgeGraph,
    vd: VectorDb,
    samples: list[int],
    k: int,
    q,
    direction: Direction = "either",
) -> HitsResult:
    """Retrieval hit rate: how many of the top q are within k hops.

    ``q`` may be a single integer or a sequence; every sample must have a
    vector in the index. The sample itself is excluded from retrieval.
    """
    q_values = [q] if isinstance(q, int) else list(q)
    for sample in samples:
        if sample not in vd:
            raise MissingVectorError(sample)
    result = HitsResult()
    reach_cache = {
        sample: kg.k_hop_reachable(sample, k, direction) for sample in samples
    }
    for q_val in q_values:
        if q_val < 1:
            raise ValueError(f"q must be >= 1, got {q_val}")
        rates = []
        for sample in samples:
            hits = vd.top_k(vd.vector(sample), q_val, exclude={sample})
            r = sum(1 for h in hits if h.entity_id in reach_cache[sample])
            result.details.append(HitsDetail(sample, q_val, r))
            rates.append(r / q_val)
        result.rates[q_val] = float(np.mean(rates)) if rates else 0.0
    return result


@dataclass(frozen=True)
class PrecisionSample:
    """Human relevance labels for one entity's top-t retrieval."""

    entity_id: int
    labels: tuple[bool, ...]


@dataclass(frozen=True)
class PrecisionSummary:
    per_sample: tuple[float, ...]
    mean: float
    stdev: float

    def to_dict(self) -> dict:
        return {
            "per_sample": list(self.per_sample),
            "mean": self.mean,
            "stdev": self.stdev,
        }


def precision(samples: list[PrecisionSample]) -> PrecisionSummary:
    """Per-sample precision p = s/t with mean and sample standard deviation."""
    if not samples:
        raise ValueError("precision needs at least one sample")
    t = len(samples[0].labels)
    if t < 1:
        raise ValueError("label lists must be nonempty")
    for sample in samples:
        if len(sample.labels) != t:
            raise ValueError(
                f"entity {sample.entity_id} has {len(sample.labels)} labels, expected {t}"
            )
    per = tuple(sum(sample.labels) / t for sample in samples)
    mean = float(np.mean(per))
    stdev = float(np.std(per, ddof=1)) if len(per) > 1 else 0.0
    return PrecisionSummary(per_sample=per, mean=mean, stdev=stdev)


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = sorted(float(x) for x in a)
    b = sorted(float(x) for x in b)
    if not a or not b:
        raise ValueError("both samples must be nonempty")
    d = 0.0
    for x in a + b:
        fa = bisect.bisect_right(a, x) / len(a)
        fb = bisect.bisect_right(b, x) / len(b)
        d = max(d, abs(fa - fb))
    return d


@dataclass(frozen=True)
class Triple:
    """An edge as a (head, relation, tail) training triple."""

    head: int
    relation: TacticLabel
    tail: int


def triples_from_kg(kg: KnowledgeGraph) -> list[Triple]:
    """One triple per edge, ascending (head, tail)."""
    return [
        Triple(head=edge.src, relation=edge.tactic, tail=edge.dst)
        for edge in kg.iter_edges()
    ]


@dataclass(frozen=True)
class TranseConfig:
    """Hyperparameters of the TransE baseline trainer."""

    dim: int = 384
    margin: float = 1.0
    learning_rate: float = 0.01
    epochs: int = 100
    negatives_per_positive: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.margin <= 0 or self.learning_rate <= 0:
            raise ValueError("dim, margin, and learning_rate must be positive")
        if self.epochs < 0 or self.negatives_per_positive < 1:
            raise ValueError("epochs must be >= 0 and negatives >= 1")


@dataclass
class TranseResult:
    """Trained vectors plus the loss curve."""

    entity_vectors: dict[int, np.ndarray]
    relation_vectors: dict[TacticLabel, np.ndarray]
    epoch_losses: list[float]


def transe_train(triples: list[Triple], cfg: TranseConfig = TranseConfig()) -> TranseResult:
    """Margin-based TransE training over (head, relation, tail) triples.

    Vectors initialize uniformly in [-6/sqrt(dim), 6/sqrt(dim)] from the
    seed. Each epoch walks the triples in order; for each, one corrupted
    triple (head or tail replaced, chosen uniformly) yields a hinge loss
    max(0, margin + d_pos - d_neg) and an SGD step; touched entity vectors
    are renormalized to unit length after each update. Zero epochs return
    the raw initialization.
    """
    if not triples:
        raise EmptyTriplesError("cannot train on zero triples")
    rng = np.random.default_rng(cfg.seed)
    entity_ids = sorted({t.head for t in triples} | {t.tail for t in triples})
    relations = sorted({t.relation for t in triples}, key=lambda r: r.value)
    ent_index = {eid: i for i, eid in enumerate(entity_ids)}
    rel_index = {rel: i for i, rel in enumerate(relations)}
    bound = 6.0 / np.sqrt(cfg.dim)
    ent = rng.uniform(-bound, bound, size=(len(entity_ids), cfg.dim))
    rel = rng.uniform(-bound, bound, size=(len(relations), cfg.dim))
    # relation vectors are length-normalized once, at initialization only
    rel /= np.maximum(np.linalg.norm(rel, axis=1, keepdims=True), 1e-12)

    def renorm(i: int) -> None:
        norm = np.linalg.norm(ent[i])
        if norm > 1e-12:
            ent[i] /= norm

    epoch_losses: list[float] = []
    n = len(entity_ids)
    for _ in range(cfg.epochs):
        losses = []
        for triple in triples:
            hi, ti = ent_index[triple.head], ent_index[triple.tail]
            ri = rel_index[triple.relation]
            for _ in range(cfg.negatives_per_positive):
                corrupt_head = bool(rng.integers(2))
                replaced = hi if corrupt_head else ti
                candidate = int(rng.integers(n))
                if candidate == replaced:
                    candidate = (candidate + 1) % n
                chi, cti = (candidate, ti) if corrupt_head else (hi, candidate)

                v_pos = ent[hi] + rel[ri] - ent[ti]
                v_neg = ent[chi] + rel[ri] - ent[cti]
                d_pos = float(np.linalg.norm(v_pos))
                d_neg = float(np.linalg.norm(v_neg))
                loss = cfg.margin + d_pos - d_neg
                losses.append(max(0.0, loss))
                if loss <= 0.0:
                    continue
                g_pos = v_pos / d_pos if d_pos > 1e-12 else np.zeros(cfg.dim)
                g_neg = v_neg / d_neg if d_neg > 1e-12 else np.zeros(cfg.dim)
                lr = cfg.learning_rate
                ent[hi] -= lr * g_pos
                ent[ti] += lr * g_pos
                ent[chi] += lr * g_neg
                ent[cti] -= lr * g_neg
                rel[ri] -= lr * (g_pos - g_neg)
                for idx in {hi, ti, chi, cti}:
                    renorm(idx)
        epoch_losses.append(float(np.mean(losses)))
    return TranseResult(
        entity_vectors={eid: ent[i].copy() for eid, i in ent_index.items()},
        relation_vectors={r: rel[i].copy() for r, i in rel_index.items()},
        epoch_losses=epoch_losses,
    )


def transe_to_vd(result: TranseResult, dim: int = 384) -> VectorDb:
    """Load trained entity vectors into a searchable index."""
    db = VectorDb(dim=dim, strategy_tag="transe")
    for entity_id in sorted(result.entity_vectors):
        db.insert(entity_id, result.entity_vectors[entity_id])
    return db
