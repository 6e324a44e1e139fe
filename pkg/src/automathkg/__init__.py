"""AutoMathKG: automated construction, augmentation, fusion, completion,
and retrieval evaluation of a mathematical knowledge graph."""

__version__ = "0.1.0"

from .kg import (
    BodySegment,
    DerivationRecord,
    Entity,
    EntityType,
    KnowledgeGraph,
    MathField,
    TacticLabel,
    load_kg,
    normalize_title,
    save_kg,
)

__all__ = [
    "BodySegment",
    "DerivationRecord",
    "Entity",
    "EntityType",
    "KnowledgeGraph",
    "MathField",
    "TacticLabel",
    "__version__",
    "load_kg",
    "normalize_title",
    "save_kg",
]
