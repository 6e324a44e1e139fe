"""Knowledge fusion: judged merging of incoming entities into a graph.

For each incoming entity the nearest existing entities are retrieved from
the vector index and a language model judges pairwise consistency. Zero
consistent candidates adds the entity under a fresh id; exactly one merges
into it; several trigger a second judgement that picks the best target.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field as dc_field
from typing import Iterable

from .embedding import Embedder
from .errors import (
    BackendUnavailableError,
    DegenerateVectorError,
    DuplicateTitleError,
    EmptyIndexError,
    IdNotInCandidatesError,
    UndecidableResponseError,
)
from .kg import Entity, KnowledgeGraph, normalize_title
from .llm import LlmBackend, judge_best_candidate, judge_consistency
from .llm.backends import LlmParams
from .vectordb import VectorDb, embed_for_db

logger = logging.getLogger(__name__)

__all__ = [
    "FusionConfig",
    "FusionDecision",
    "FusionReport",
    "candidate_entities",
    "fuse",
    "merge_entities",
]


@dataclass(frozen=True)
class FusionConfig:
    """Knobs of the fusion pipeline."""

    n_candidates: int = 5


@dataclass
class FusionDecision:
    """What happened to one incoming entity."""

    incoming_id: int
    incoming_title: str
    action: str  # "added" | "merged" | "skipped"
    candidates: list[tuple[int, float]] = dc_field(default_factory=list)
    verdicts: list[bool] = dc_field(default_factory=list)
    target_id: int | None = None
    assigned_id: int | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "incoming_id": self.incoming_id,
            "incoming_title": self.incoming_title,
            "action": self.action,
            "candidates": [
                {"entity_id": eid, "score": score} for eid, score in self.candidates
            ],
            "verdicts": self.verdicts,
            "target_id": self.target_id,
            "assigned_id": self.assigned_id,
            "note": self.note,
        }


@dataclass
class FusionReport:
    """Aggregate outcome of one fusion run."""

    added: int = 0
    merged: int = 0
    skipped: int = 0
    warnings: list[str] = dc_field(default_factory=list)
    decisions: list[FusionDecision] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "added": self.added,
            "merged": self.merged,
            "skipped": self.skipped,
            "warnings": list(self.warnings),
            "decisions": [d.to_dict() for d in self.decisions],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent)


def candidate_entities(
    kg: KnowledgeGraph,
    vd: VectorDb,
    embedder: Embedder,
    entity: Entity,
    n: int,
) -> list[tuple[Entity, float]]:
    """The n nearest existing entities to an incoming one, with scores."""
    query = embed_for_db(vd, embedder, entity)
    try:
        hits = vd.top_k(query, n)
    except EmptyIndexError:
        return []
    return [(kg.entity(hit.entity_id), hit.score) for hit in hits]


def merge_entities(kg: KnowledgeGraph, target_id: int, incoming: Entity) -> None:
    """Fold an incoming entity into an existing one.

    The target keeps its title, contents, and field. References and their
    tactics are unioned (the target's tactic wins on conflict); incoming
    proofs or solutions are appended unless a record with identical
    contents already exists, in which case only its references are
    unioned. The incoming title becomes an alias of the target.
    """
    target = kg.entity(target_id)
    for ref in incoming.refs:
        if ref not in target.refs:
            target.refs.append(ref)
    for ref, tactic in incoming.references_tactics.items():
        if ref not in target.refs:
            target.refs.append(ref)
        target.references_tactics.setdefault(ref, tactic)

    if incoming.type == target.type:
        pairs = (
            (target.proofs, incoming.proofs),
            (target.solutions, incoming.solutions),
        )
        for existing_records, incoming_records in pairs:
            for record in incoming_records:
                match = next(
                    (r for r in existing_records if r.contents == record.contents),
                    None,
                )
                if match is None:
                    existing_records.append(
                        type(record)(
                            contents=list(record.contents),
                            refs=list(record.refs),
                            bodylist=list(record.bodylist),
                            references_tactics=dict(record.references_tactics),
                        )
                    )
                    continue
                for ref in record.refs:
                    if ref not in match.refs:
                        match.refs.append(ref)
                for ref, tactic in record.references_tactics.items():
                    if ref not in match.refs:
                        match.refs.append(ref)
                    match.references_tactics.setdefault(ref, tactic)

    incoming_key = normalize_title(incoming.title)
    if incoming_key and incoming_key != normalize_title(target.title):
        kg.add_alias(incoming_key, target_id)


def _prepare_added(incoming: Entity, new_id: int) -> Entity:
    entity = incoming.clone()
    entity.id = new_id
    entity.in_refs = {}
    entity.in_ref_ids = []
    entity.out_refs = {}
    entity.out_ref_ids = []
    return entity


def fuse(
    kg: KnowledgeGraph,
    incoming: Iterable[Entity] | KnowledgeGraph,
    vd: VectorDb,
    embedder: Embedder,
    backend: LlmBackend,
    config: FusionConfig = FusionConfig(),
    params: LlmParams | None = None,
) -> FusionReport:
    """Fuse incoming entities into a graph, extending its vector index.

    Incoming entities are processed in ascending id order. Added entities
    receive fresh ids and are embedded into the index immediately, so
    later incoming entities can match them. Edges are rebuilt once at the
    end. A backend outage skips the affected entity with a warning.
    """
    if isinstance(incoming, KnowledgeGraph):
        incoming_entities = list(incoming.iter_entities())
    else:
        incoming_entities = sorted(incoming, key=lambda e: e.id)
    report = FusionReport()

    for entity in incoming_entities:
        decision = FusionDecision(
            incoming_id=entity.id,
            incoming_title=entity.title,
            action="skipped",
        )
        report.decisions.append(decision)
        try:
            ranked = candidate_entities(kg, vd, embedder, entity, config.n_candidates)
        except DegenerateVectorError as exc:
            ranked = []
            decision.note = f"incoming entity could not be embedded: {exc}"
        except BackendUnavailableError as exc:
            report.skipped += 1
            decision.note = f"embedder unavailable: {exc}"
            report.warnings.append(
                f"incoming entity {entity.id} skipped: {decision.note}"
            )
            logger.warning("%s", report.warnings[-1])
            continue
        decision.candidates = [(cand.id, score) for cand, score in ranked]

        try:
            verdicts = [
                judge_consistency(backend, cand, entity, params=params)
                for cand, _ in ranked
            ]
            decision.verdicts = verdicts
            consistent = [cand for (cand, _), yes in zip(ranked, verdicts) if yes]
            target: Entity | None = None
            if len(consistent) == 1:
                target = consistent[0]
            elif len(consistent) > 1:
                try:
                    best = judge_best_candidate(
                        backend, entity, consistent, params=params
                    )
                    target = kg.entity(best)
                except (UndecidableResponseError, IdNotInCandidatesError) as exc:
                    decision.note = f"best-candidate judgement failed: {exc}"
                    report.warnings.append(
                        f"incoming entity {entity.id}: {decision.note}; adding as new"
                    )
                    logger.warning("%s", report.warnings[-1])
        except BackendUnavailableError as exc:
            report.skipped += 1
            decision.note = f"language model unavailable: {exc}"
            report.warnings.append(
                f"incoming entity {entity.id} skipped: {decision.note}"
            )
            logger.warning("%s", report.warnings[-1])
            continue

        if target is not None:
            merge_entities(kg, target.id, entity)
            decision.action = "merged"
            decision.target_id = target.id
            report.merged += 1
            continue

        new_id = kg.next_id()
        added = _prepare_added(entity, new_id)
        try:
            kg.add_entity(added)
        except DuplicateTitleError:
            owner = kg.exact_lookup(normalize_title(entity.title))
            assert owner is not None
            merge_entities(kg, owner, entity)
            decision.action = "merged"
            decision.target_id = owner
            decision.note = "title already bound; merged into its owner"
            report.warnings.append(
                f"incoming entity {entity.id} title {entity.title!r} already "
                f"bound to entity {owner}; merged instead of added"
            )
            logger.warning("%s", report.warnings[-1])
            report.merged += 1
            continue
        decision.action = "added"
        decision.assigned_id = new_id
        report.added += 1
        if new_id not in vd:
            try:
                vd.insert(new_id, embed_for_db(vd, embedder, added))
            except DegenerateVectorError as exc:
                report.warnings.append(
                    f"added entity {new_id} has no vector: {exc}"
                )
                logger.warning("%s", report.warnings[-1])

    edge_warnings = kg.rebuild_edges()
    report.warnings.extend(edge_warnings)
    return report
