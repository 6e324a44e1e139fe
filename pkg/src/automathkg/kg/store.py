"""JSON Lines persistence for knowledge graphs.

Line 1 is the header object ``{"schema": "automathkg", "version": 1}``
(plus an ``aliases`` map when fusion recorded absorbed titles); every
following line is one entity with exactly the sixteen schema keys, in
schema order. Unknown values are serialized as empty strings/lists/maps,
never omitted, so the format stays byte-stable and diff-friendly.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import (
    InvalidEntityError,
    MalformedRecordError,
    SchemaVersionMismatchError,
)
from .graph import Edge, KnowledgeGraph
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

SCHEMA_NAME = "automathkg"
SCHEMA_VERSION = 1

ENTITY_KEYS = (
    "id",
    "type",
    "label",
    "title",
    "field",
    "contents",
    "bodylist",
    "refs",
    "references_tactics",
    "source",
    "proofs",
    "solutions",
    "in_refs",
    "in_ref_ids",
    "out_refs",
    "out_ref_ids",
)

RECORD_KEYS = ("contents", "refs", "bodylist", "references_tactics")


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _segment_to_dict(seg: BodySegment) -> dict:
    return {"description": seg.description, "action": seg.action.value}


def _record_to_dict(rec: DerivationRecord) -> dict:
    return {
        "contents": list(rec.contents),
        "refs": list(rec.refs),
        "bodylist": [_segment_to_dict(s) for s in rec.bodylist],
        "references_tactics": {t: l.value for t, l in rec.references_tactics.items()},
    }


def entity_to_dict(entity: Entity) -> dict:
    """Entity as a plain dict with the sixteen schema keys in order."""
    return {
        "id": entity.id,
        "type": entity.type.value,
        "label": entity.label,
        "title": entity.title,
        "field": entity.field.value if entity.field is not None else "",
        "contents": list(entity.contents),
        "bodylist": [_segment_to_dict(s) for s in entity.bodylist],
        "refs": list(entity.refs),
        "references_tactics": {
            t: l.value for t, l in entity.references_tactics.items()
        },
        "source": entity.source,
        "proofs": [_record_to_dict(r) for r in entity.proofs],
        "solutions": [_record_to_dict(r) for r in entity.solutions],
        "in_refs": {t: l.value for t, l in entity.in_refs.items()},
        "in_ref_ids": list(entity.in_ref_ids),
        "out_refs": {t: l.value for t, l in entity.out_refs.items()},
        "out_ref_ids": list(entity.out_ref_ids),
    }


def entity_json_line(entity: Entity) -> str:
    """The exact serialized form of one entity line (no trailing newline)."""
    return _dumps(entity_to_dict(entity))


def _expect(cond: bool, reason: str) -> None:
    if not cond:
        raise ValueError(reason)


def _str_list(value, what: str) -> list[str]:
    _expect(isinstance(value, list) and all(isinstance(x, str) for x in value),
            f"{what} must be a list of strings")
    return list(value)


def _tactic_map(value, what: str) -> dict[str, TacticLabel]:
    _expect(isinstance(value, dict), f"{what} must be an object")
    out: dict[str, TacticLabel] = {}
    for k, v in value.items():
        _expect(isinstance(k, str), f"{what} keys must be strings")
        try:
            out[k] = TacticLabel(v)
        except ValueError:
            raise ValueError(f"{what}[{k!r}] has unknown tactic {v!r}") from None
    return out


def _bodylist(value, what: str) -> list[BodySegment]:
    _expect(isinstance(value, list), f"{what} must be a list")
    out = []
    for i, item in enumerate(value):
        _expect(isinstance(item, dict) and set(item) == {"description", "action"},
                f"{what}[{i}] must be a description/action object")
        _expect(isinstance(item["description"], str), f"{what}[{i}].description must be a string")
        try:
            action = TacticLabel(item["action"])
        except ValueError:
            raise ValueError(f"{what}[{i}] has unknown action {item['action']!r}") from None
        out.append(BodySegment(item["description"], action))
    return out


def _record(value, what: str) -> DerivationRecord:
    _expect(isinstance(value, dict) and set(value) == set(RECORD_KEYS),
            f"{what} must be an object with keys {RECORD_KEYS}")
    return DerivationRecord(
        contents=_str_list(value["contents"], f"{what}.contents"),
        refs=_str_list(value["refs"], f"{what}.refs"),
        bodylist=_bodylist(value["bodylist"], f"{what}.bodylist"),
        references_tactics=_tactic_map(
            value["references_tactics"], f"{what}.references_tactics"
        ),
    )


def entity_from_dict(obj: dict) -> Entity:
    """Parse and validate one entity object; raises ValueError on bad shape."""
    _expect(isinstance(obj, dict), "entity line must be a JSON object")
    missing = set(ENTITY_KEYS) - set(obj)
    extra = set(obj) - set(ENTITY_KEYS)
    _expect(not missing, f"missing keys: {sorted(missing)}")
    _expect(not extra, f"unexpected keys: {sorted(extra)}")
    _expect(isinstance(obj["id"], int) and not isinstance(obj["id"], bool) and obj["id"] >= 0,
            "id must be a non-negative integer")
    try:
        entity_type = EntityType(obj["type"])
    except ValueError:
        raise ValueError(f"unknown entity type {obj['type']!r}") from None
    _expect(isinstance(obj["field"], str), "field must be a string")
    math_field: MathField | None = None
    if obj["field"]:
        try:
            math_field = MathField(obj["field"])
        except ValueError:
            raise ValueError(f"unknown field {obj['field']!r}") from None
    for key in ("label", "title", "source"):
        _expect(isinstance(obj[key], str), f"{key} must be a string")
    for key in ("in_ref_ids", "out_ref_ids"):
        _expect(isinstance(obj[key], list)
                and all(isinstance(x, int) and not isinstance(x, bool) for x in obj[key]),
                f"{key} must be a list of integers")

    entity = Entity(
        id=obj["id"],
        type=entity_type,
        label=obj["label"],
        title=obj["title"],
        field=math_field,
        contents=_str_list(obj["contents"], "contents"),
        bodylist=_bodylist(obj["bodylist"], "bodylist"),
        refs=_str_list(obj["refs"], "refs"),
        references_tactics=_tactic_map(obj["references_tactics"], "references_tactics"),
        source=obj["source"],
        proofs=[_record(r, f"proofs[{i}]") for i, r in enumerate(obj["proofs"])],
        solutions=[_record(r, f"solutions[{i}]") for i, r in enumerate(obj["solutions"])],
        in_refs=_tactic_map(obj["in_refs"], "in_refs"),
        in_ref_ids=list(obj["in_ref_ids"]),
        out_refs=_tactic_map(obj["out_refs"], "out_refs"),
        out_ref_ids=list(obj["out_ref_ids"]),
    )
    _expect(len(entity.in_refs) == len(entity.in_ref_ids),
            "in_refs and in_ref_ids disagree on cardinality")
    _expect(len(entity.out_refs) == len(entity.out_ref_ids),
            "out_refs and out_ref_ids disagree on cardinality")
    validate_entity(entity)
    return entity


def save_kg(kg: KnowledgeGraph, path: str | Path) -> None:
    """Write the graph as JSON Lines; output is byte-stable for a given graph."""
    header: dict = {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION}
    if kg.aliases:
        header["aliases"] = {k: kg.aliases[k] for k in sorted(kg.aliases)}
    lines = [_dumps(header)]
    lines.extend(entity_json_line(e) for e in kg.iter_entities())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_kg(path: str | Path) -> KnowledgeGraph:
    """Read a KG file; adjacency is reconstructed from the stored link maps."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise MalformedRecordError(1, "empty file, expected a schema header")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(1, f"header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or "schema" not in header or "version" not in header:
        raise MalformedRecordError(1, "header must carry schema and version")
    if header["schema"] != SCHEMA_NAME or header["version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"expected {SCHEMA_NAME} v{SCHEMA_VERSION}, "
            f"found {header['schema']!r} v{header['version']!r}"
        )

    kg = KnowledgeGraph()
    line_of: dict[int, int] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise MalformedRecordError(line_no, "blank line inside entity section")
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(line_no, f"invalid JSON: {exc}") from None
        try:
            entity = entity_from_dict(obj)
        except (ValueError, InvalidEntityError) as exc:
            raise MalformedRecordError(line_no, str(exc)) from None
        if entity.id in kg.entities:
            raise MalformedRecordError(line_no, f"duplicate entity id {entity.id}")
        key = normalize_title(entity.title)
        if key and key in kg.title_index:
            raise MalformedRecordError(
                line_no, f"duplicate normalized title {key!r}"
            )
        kg.entities[entity.id] = entity
        if key:
            kg.title_index[key] = entity.id
        line_of[entity.id] = line_no

    aliases = header.get("aliases", {})
    if not isinstance(aliases, dict):
        raise MalformedRecordError(1, "aliases must be an object")
    for alias, target in aliases.items():
        if not isinstance(alias, str) or not isinstance(target, int):
            raise MalformedRecordError(1, "aliases must map titles to entity ids")
        if target not in kg.entities:
            raise MalformedRecordError(1, f"alias {alias!r} points at missing id {target}")
        if alias not in kg.title_index:
            kg.aliases[alias] = target

    # adjacency comes from the stored incoming-link maps
    kg.out_adj = {eid: [] for eid in kg.entities}
    kg.in_adj = {eid: [] for eid in kg.entities}
    for entity in kg.iter_entities():
        for (title, tactic), src in zip(entity.in_refs.items(), entity.in_ref_ids):
            if src not in kg.entities:
                raise MalformedRecordError(
                    line_of[entity.id], f"in_ref_ids points at missing id {src}"
                )
            edge = Edge(src, entity.id, tactic)
            kg.out_adj[src].append(edge)
            kg.in_adj[entity.id].append(edge)
    for eid in kg.entities:
        kg.out_adj[eid].sort(key=lambda e: e.dst)

    _refresh_unresolved(kg)
    return kg


def _refresh_unresolved(kg: KnowledgeGraph) -> None:
    kg.unresolved_refs = []
    seen: set[tuple[int, str]] = set()
    for entity in kg.iter_entities():
        maps = [entity.references_tactics]
        maps.extend(r.references_tactics for r in entity.derivation_records())
        for tactics in maps:
            for title in tactics:
                if kg.exact_lookup(title) is None:
                    mark = (entity.id, title)
                    if mark not in seen:
                        seen.add(mark)
                        kg.unresolved_refs.append(mark)
