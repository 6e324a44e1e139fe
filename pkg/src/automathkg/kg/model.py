"""Entity schema for the mathematical knowledge graph.

An entity is a definition, theorem, or problem (plus an ``other`` bucket
for remarks, notation pages, and similar material). Every entity carries
the same sixteen attributes; values that are not known yet stay empty
rather than absent, so records keep a fixed shape end to end.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field as dc_field
from enum import Enum

from ..errors import InvalidEntityError

__all__ = [
    "EntityType",
    "TacticLabel",
    "MathField",
    "BodySegment",
    "DerivationRecord",
    "Entity",
    "normalize_title",
    "validate_entity",
]


class EntityType(str, Enum):
    DEFINITION = "definition"
    THEOREM = "theorem"
    PROBLEM = "problem"
    OTHER = "other"


class TacticLabel(str, Enum):
    """Role a reference (or body segment) plays in a piece of mathematics."""

    PREMISE = "premise"
    ASSUMPTION = "assumption"
    LEMMA = "lemma"
    PROPOSITION = "proposition"
    COROLLARY = "corollary"
    CALCULATION = "calculation"
    ENUMERATION = "enumeration"
    DEFINITION = "definition"
    CONCLUSION = "conclusion"
    DEDUCTION = "deduction"


class MathField(str, Enum):
    """Closed set of top-level field tags."""

    ALGEBRA = "algebra"
    GEOMETRY = "geometry"
    ANALYSIS = "analysis"
    LOGIC = "logic"
    PROBABILITY_AND_STATISTICS = "probability and statistics"
    APPLIED_MATHEMATICS = "applied mathematics"
    FOUNDATIONS_OF_MATHEMATICS = "foundations of mathematics"


@dataclass
class BodySegment:
    """One labelled element of an entity's content list."""

    description: str
    action: TacticLabel


@dataclass
class DerivationRecord:
    """One proof (for theorems) or one solution (for problems)."""

    contents: list[str] = dc_field(default_factory=list)
    refs: list[str] = dc_field(default_factory=list)
    bodylist: list[BodySegment] = dc_field(default_factory=list)
    references_tactics: dict[str, TacticLabel] = dc_field(default_factory=dict)


@dataclass
class Entity:
    """A single knowledge-graph node with its full attribute set.

    ``in_refs``/``out_refs`` and the parallel id lists are derived from the
    graph adjacency by ``KnowledgeGraph.rebuild_edges``; they are stored on
    the entity so that serialized records are self-describing.
    """

    id: int
    type: EntityType
    label: str = ""
    title: str = ""
    field: MathField | None = None
    contents: list[str] = dc_field(default_factory=list)
    bodylist: list[BodySegment] = dc_field(default_factory=list)
    refs: list[str] = dc_field(default_factory=list)
    references_tactics: dict[str, TacticLabel] = dc_field(default_factory=dict)
    source: str = ""
    proofs: list[DerivationRecord] = dc_field(default_factory=list)
    solutions: list[DerivationRecord] = dc_field(default_factory=list)
    in_refs: dict[str, TacticLabel] = dc_field(default_factory=dict)
    in_ref_ids: list[int] = dc_field(default_factory=list)
    out_refs: dict[str, TacticLabel] = dc_field(default_factory=dict)
    out_ref_ids: list[int] = dc_field(default_factory=list)

    def clone(self) -> "Entity":
        return copy.deepcopy(self)

    def derivation_records(self) -> list[DerivationRecord]:
        """Proofs and solutions, in stored order."""
        return list(self.proofs) + list(self.solutions)


_COLON = re.compile(r"\s*:\s*")


def normalize_title(title: str) -> str:
    """Canonical form used for title lookups.

    Lowercases, collapses whitespace runs, trims, and binds ``:`` tightly
    so ProofWiki-style namespaced titles ("Definition:Set") and their
    LLM-emitted spellings ("definition: set") coincide.
    """
    collapsed = " ".join(title.split())
    return _COLON.sub(":", collapsed).lower()


def validate_entity(e: Entity) -> None:
    """Check the schema invariants; raise :class:`InvalidEntityError` on violation."""
    if not isinstance(e.id, int) or isinstance(e.id, bool) or e.id < 0:
        raise InvalidEntityError(f"entity id must be a non-negative integer, got {e.id!r}")
    if not isinstance(e.type, EntityType):
        raise InvalidEntityError(f"entity {e.id}: type {e.type!r} is not an EntityType")
    if e.field is not None and not isinstance(e.field, MathField):
        raise InvalidEntityError(f"entity {e.id}: field {e.field!r} is not a MathField")
    if e.proofs and e.type is not EntityType.THEOREM:
        raise InvalidEntityError(f"entity {e.id}: only theorem entities carry proofs")
    if e.solutions and e.type is not EntityType.PROBLEM:
        raise InvalidEntityError(f"entity {e.id}: only problem entities carry solutions")
    _validate_tactics(e.id, e.references_tactics, e.refs, "entity")
    for i, seg in enumerate(e.bodylist):
        if not seg.description:
            raise InvalidEntityError(f"entity {e.id}: bodylist[{i}] has an empty description")
        if not isinstance(seg.action, TacticLabel):
            raise InvalidEntityError(f"entity {e.id}: bodylist[{i}] action is not a TacticLabel")
    for kind, records in (("proof", e.proofs), ("solution", e.solutions)):
        for i, rec in enumerate(records):
            _validate_tactics(e.id, rec.references_tactics, rec.refs, f"{kind}[{i}]")
            if kind == "solution" and rec.bodylist:
                raise InvalidEntityError(
                    f"entity {e.id}: solution[{i}] must keep an empty bodylist"
                )
            for j, seg in enumerate(rec.bodylist):
                if not seg.description:
                    raise InvalidEntityError(
                        f"entity {e.id}: {kind}[{i}].bodylist[{j}] has an empty description"
                    )


def _validate_tactics(
    entity_id: int,
    tactics: dict[str, TacticLabel],
    refs: list[str],
    where: str,
) -> None:
    # every tactic key must be an actual reference of the same scope
    known = set(refs)
    for title, tactic in tactics.items():
        if title not in known:
            raise InvalidEntityError(
                f"entity {entity_id}: {where} references_tactics key {title!r} "
                f"does not appear in refs"
            )
        if not isinstance(tactic, TacticLabel):
            raise InvalidEntityError(
                f"entity {entity_id}: {where} tactic {tactic!r} is not a TacticLabel"
            )
