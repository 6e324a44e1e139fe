"""Directed knowledge graph over math entities.

Edge direction follows the referenced-to-referencing convention: when
entity ``j`` cites entity ``i`` (i's title appears in one of j's
``references_tactics`` maps), the edge runs ``i -> j``. Every edge carries
the tactic the citing side assigned to the reference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import islice
from typing import Iterator, Literal

import networkx as nx

from ..errors import DuplicateIdError, DuplicateTitleError, UnknownEntityError
from .model import Entity, EntityType, TacticLabel, normalize_title, validate_entity

logger = logging.getLogger(__name__)

Direction = Literal["forward", "backward", "either"]

DEFAULT_CYCLE_CAP = 1_000_000


@dataclass
class Edge:
    """A reference edge. ``src`` is the referenced entity, ``dst`` the citing one."""

    src: int
    dst: int
    tactic: TacticLabel


@dataclass
class GraphStats:
    node_count: int
    edge_count: int
    by_type: dict[EntityType, int]
    head_count: int
    leaf_count: int
    simple_cycle_count: int
    simple_cycle_enumeration_capped: bool
    field_distribution: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "by_type": {t.value: n for t, n in self.by_type.items()},
            "head_count": self.head_count,
            "leaf_count": self.leaf_count,
            "simple_cycle_count": self.simple_cycle_count,
            "simple_cycle_enumeration_capped": self.simple_cycle_enumeration_capped,
            "field_distribution": dict(self.field_distribution),
        }


class KnowledgeGraph:
    """Mutable entity store plus derived adjacency.

    Mutations invalidate the adjacency; call :meth:`rebuild_edges` after a
    batch of changes. Readers may share an instance, but writers need
    external coordination (single-writer discipline).
    """

    def __init__(self) -> None:
        self.entities: dict[int, Entity] = {}
        self.title_index: dict[str, int] = {}
        self.aliases: dict[str, int] = {}
        self.out_adj: dict[int, list[Edge]] = {}
        self.in_adj: dict[int, list[Edge]] = {}
        self.unresolved_refs: list[tuple[int, str]] = []

    # -- basic access --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, entity_id: int) -> bool:
        return entity_id in self.entities

    def entity(self, entity_id: int) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntityError(f"no entity with id {entity_id}") from None

    def iter_entities(self) -> Iterator[Entity]:
        """Entities in ascending id order."""
        for entity_id in sorted(self.entities):
            yield self.entities[entity_id]

    def next_id(self) -> int:
        return max(self.entities, default=-1) + 1

    @property
    def edge_count(self) -> int:
        return sum(len(edges) for edges in self.out_adj.values())

    def iter_edges(self) -> Iterator[Edge]:
        for src in sorted(self.out_adj):
            yield from self.out_adj[src]

    # -- mutation -------------------------------------------------------------

    def add_entity(self, entity: Entity) -> None:
        """Insert a validated entity; titles must be unique after normalization.

        Empty titles are legal (augmentation fills them later) and are not
        indexed.
        """
        validate_entity(entity)
        if entity.id in self.entities:
            raise DuplicateIdError(f"entity id {entity.id} already present")
        key = normalize_title(entity.title)
        if key:
            existing = self.title_index.get(key)
            if existing is not None:
                raise DuplicateTitleError(
                    f"title {entity.title!r} duplicates entity {existing} after normalization"
                )
            self.title_index[key] = entity.id
        self.entities[entity.id] = entity

    def reindex_title(self, entity_id: int) -> bool:
        """Refresh the title index after an entity's title changed.

        Returns False when the new title collides with another entity's
        binding (the earlier binding wins; fusion is the dedup path).
        """
        entity = self.entity(entity_id)
        for key, bound in list(self.title_index.items()):
            if bound == entity_id:
                del self.title_index[key]
        key = normalize_title(entity.title)
        if not key:
            return True
        holder = self.title_index.get(key)
        if holder is not None and holder != entity_id:
            logger.warning(
                "title %r of entity %d collides with entity %d; keeping the first binding",
                entity.title, entity_id, holder,
            )
            return False
        self.title_index[key] = entity_id
        return True

    def add_alias(self, title: str, target_id: int) -> None:
        """Bind an absorbed title to a surviving entity for later resolution."""
        if target_id not in self.entities:
            raise UnknownEntityError(f"alias target {target_id} does not exist")
        key = normalize_title(title)
        if key and key not in self.title_index:
            self.aliases[key] = target_id

    # -- lookup ---------------------------------------------------------------

    def exact_lookup(self, title: str) -> int | None:
        """Resolve a title (or recorded alias) to an entity id, or None."""
        key = normalize_title(title)
        if not key:
            return None
        hit = self.title_index.get(key)
        if hit is not None:
            return hit
        return self.aliases.get(key)

    # -- adjacency ------------------------------------------------------------

    def rebuild_edges(self) -> list[str]:
        """Recompute the full adjacency from the references_tactics maps.

        Scans every entity's entity-level, per-proof, and per-solution
        tactic maps; one edge per resolved (referenced, citing) pair, first
        tactic wins. Rewrites in_refs/out_refs and the parallel id lists,
        records unresolved titles, and returns warnings for edges whose
        source is a problem or ``other`` entity (references are expected to
        originate from definitions and theorems).
        """
        edges: dict[tuple[int, int], Edge] = {}
        self.unresolved_refs = []
        seen_unresolved: set[tuple[int, str]] = set()

        for dst in sorted(self.entities):
            entity = self.entities[dst]
            maps = [entity.references_tactics]
            maps.extend(rec.references_tactics for rec in entity.proofs)
            maps.extend(rec.references_tactics for rec in entity.solutions)
            for tactics in maps:
                for title, tactic in tactics.items():
                    src = self.exact_lookup(title)
                    if src is None:
                        mark = (dst, title)
                        if mark not in seen_unresolved:
                            seen_unresolved.add(mark)
                            self.unresolved_refs.append(mark)
                        continue
                    edges.setdefault((src, dst), Edge(src, dst, tactic))

        self.out_adj = {entity_id: [] for entity_id in self.entities}
        self.in_adj = {entity_id: [] for entity_id in self.entities}
        for (src, dst) in sorted(edges):
            edge = edges[(src, dst)]
            self.out_adj[src].append(edge)
            self.in_adj[dst].append(edge)

        warnings: list[str] = []
        for entity_id in sorted(self.entities):
            entity = self.entities[entity_id]
            in_edges = sorted(self.in_adj[entity_id], key=lambda e: e.src)
            out_edges = sorted(self.out_adj[entity_id], key=lambda e: e.dst)
            entity.in_refs = {self.entities[e.src].title: e.tactic for e in in_edges}
            entity.in_ref_ids = [e.src for e in in_edges]
            entity.out_refs = {self.entities[e.dst].title: e.tactic for e in out_edges}
            entity.out_ref_ids = [e.dst for e in out_edges]
            if entity.type in (EntityType.PROBLEM, EntityType.OTHER):
                for e in out_edges:
                    msg = (
                        f"edge {e.src}->{e.dst} originates from a "
                        f"{entity.type.value} entity; references should come "
                        f"from definitions or theorems"
                    )
                    warnings.append(msg)
                    logger.warning(msg)
        return warnings

    def _neighbors(self, entity_id: int, direction: Direction) -> set[int]:
        out = {e.dst for e in self.out_adj.get(entity_id, ())}
        inc = {e.src for e in self.in_adj.get(entity_id, ())}
        if direction == "forward":
            return out
        if direction == "backward":
            return inc
        if direction == "either":
            return out | inc
        raise ValueError(f"unknown direction {direction!r}")

    def k_hop_reachable(
        self, src: int, k: int, direction: Direction = "forward"
    ) -> set[int]:
        """Ids reachable from ``src`` within 1..k hops.

        ``src`` itself appears only when it lies on a cycle of length <= k.
        k=0 yields the empty set.
        """
        if src not in self.entities:
            raise UnknownEntityError(f"no entity with id {src}")
        if k <= 0:
            return set()
        reached: set[int] = set()
        frontier = {src}
        for _ in range(k):
            nxt: set[int] = set()
            for node in frontier:
                nxt |= self._neighbors(node, direction)
            nxt -= reached
            if not nxt:
                break
            reached |= nxt
            frontier = nxt
        return reached

    # -- reporting -------------------------------------------------------------

    def stats(self, simple_cycle_cap: int = DEFAULT_CYCLE_CAP) -> GraphStats:
        """Structural summary; cycle enumeration uses Johnson's algorithm.

        Enumeration halts at ``simple_cycle_cap`` and sets the capped flag
        instead of running away on dense graphs.
        """
        by_type = {t: 0 for t in EntityType}
        field_distribution: dict[str, int] = {}
        for entity in self.entities.values():
            by_type[entity.type] += 1
            if entity.field is not None:
                key = entity.field.value
                field_distribution[key] = field_distribution.get(key, 0) + 1

        head_count = sum(1 for eid in self.entities if not self.in_adj.get(eid))
        leaf_count = sum(1 for eid in self.entities if not self.out_adj.get(eid))

        digraph = nx.DiGraph()
        digraph.add_nodes_from(self.entities)
        digraph.add_edges_from((e.src, e.dst) for e in self.iter_edges())
        cycle_count = sum(1 for _ in islice(nx.simple_cycles(digraph), simple_cycle_cap))
        capped = cycle_count >= simple_cycle_cap

        return GraphStats(
            node_count=len(self.entities),
            edge_count=self.edge_count,
            by_type=by_type,
            head_count=head_count,
            leaf_count=leaf_count,
            simple_cycle_count=cycle_count,
            simple_cycle_enumeration_capped=capped,
            field_distribution=dict(sorted(field_distribution.items())),
        )
