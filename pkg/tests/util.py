"""Small builders shared across test modules."""

from __future__ import annotations

import numpy as np

from automathkg.kg import Entity, EntityType, KnowledgeGraph, TacticLabel


def make_entity(entity_id: int, entity_type: EntityType = EntityType.DEFINITION, **kw) -> Entity:
    kw.setdefault("title", f"Node {entity_id}")
    return Entity(id=entity_id, type=entity_type, **kw)


def kg_from_edges(
    n: int,
    edges,
    tactic: TacticLabel = TacticLabel.DEDUCTION,
    entity_type: EntityType = EntityType.THEOREM,
) -> KnowledgeGraph:
    """A graph of ``n`` nodes whose adjacency equals ``edges`` (src, dst pairs)."""
    kg = KnowledgeGraph()
    for i in range(n):
        kg.add_entity(make_entity(i, entity_type))
    for u, v in edges:
        citing = kg.entities[v]
        title = f"node {u}"
        if title not in citing.refs:
            citing.refs.append(title)
            citing.references_tactics[title] = tactic
    kg.rebuild_edges()
    return kg


def random_digraph(rng, n: int, p: float, self_loops: bool = False):
    """Edge list of a random simple digraph on ``n`` nodes."""
    edges = []
    for u in range(n):
        for v in range(n):
            if u == v and not self_loops:
                continue
            if rng.random() < p:
                edges.append((u, v))
    return edges


def unit_vectors(rng: np.random.Generator, count: int, dim: int) -> dict[int, np.ndarray]:
    """Dense map of id -> unit vector, seeded."""
    out = {}
    for i in range(count):
        v = rng.normal(size=dim)
        out[i] = v / np.linalg.norm(v)
    return out
