"""Knowledge-graph core: entity schema, graph operations, persistence."""

from .graph import DEFAULT_CYCLE_CAP, Direction, Edge, GraphStats, KnowledgeGraph
from .model import (
    BodySegment,
    DerivationRecord,
    Entity,
    EntityType,
    MathField,
    TacticLabel,
    normalize_title,
    validate_entity,
)
from .store import (
    ENTITY_KEYS,
    entity_from_dict,
    entity_json_line,
    entity_to_dict,
    load_kg,
    save_kg,
)

__all__ = [
    "BodySegment",
    "DEFAULT_CYCLE_CAP",
    "DerivationRecord",
    "Direction",
    "Edge",
    "Entity",
    "EntityType",
    "ENTITY_KEYS",
    "GraphStats",
    "KnowledgeGraph",
    "MathField",
    "TacticLabel",
    "entity_from_dict",
    "entity_json_line",
    "entity_to_dict",
    "load_kg",
    "normalize_title",
    "save_kg",
    "validate_entity",
]
