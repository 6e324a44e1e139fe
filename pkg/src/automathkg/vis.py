"""Graph export for off-the-shelf viewers: vis-style JSON and Graphviz dot."""

from __future__ import annotations

import json

from .kg import EntityType, KnowledgeGraph

COLOR_BY_TYPE = {
    EntityType.DEFINITION: "yellow",
    EntityType.THEOREM: "blue",
    EntityType.PROBLEM: "red",
    EntityType.OTHER: "gray",
}

__all__ = ["COLOR_BY_TYPE", "export_vis"]


def _vis_dict(kg: KnowledgeGraph) -> dict:
    nodes = [
        {
            "id": entity.id,
            "title": entity.title,
            "type": entity.type.value,
            "color": COLOR_BY_TYPE[entity.type],
        }
        for entity in kg.iter_entities()
    ]
    edges = [
        {"from": edge.src, "to": edge.dst, "tactic": edge.tactic.value}
        for edge in kg.iter_edges()
    ]
    return {"nodes": nodes, "edges": edges}


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(kg: KnowledgeGraph) -> str:
    lines = ["digraph automathkg {"]
    for entity in kg.iter_entities():
        label = entity.title or f"entity {entity.id}"
        lines.append(
            f"  n{entity.id} [label={_dot_quote(label)} "
            f"color={_dot_quote(COLOR_BY_TYPE[entity.type])} style=filled];"
        )
    for edge in kg.iter_edges():
        lines.append(
            f"  n{edge.src} -> n{edge.dst} [label={_dot_quote(edge.tactic.value)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_vis(kg: KnowledgeGraph, format: str = "visjson") -> str:
    """Serialize the graph for display; formats: ``visjson``, ``dot``."""
    if format == "visjson":
        return json.dumps(_vis_dict(kg), ensure_ascii=False, separators=(",", ":"))
    if format == "dot":
        return _dot(kg)
    raise ValueError(f"unknown export format {format!r}")
