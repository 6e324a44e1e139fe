"""Corpus ingestion: LaTeX sources and structured record dumps.

Rule-based extraction only; anything the rules cannot recover (titles,
fields, body labels, reference tactics) is left empty for the augmentation
stage. Extraction is conservative: a matched environment consumes its whole
body, so nested rule environments never produce double-counted entities.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

from .errors import (
    InvalidEntityError,
    MissingBoundFieldError,
    UnbalancedEnvironmentError,
)
from .kg import DerivationRecord, Entity, EntityType, KnowledgeGraph

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_REF_PATTERNS",
    "DEFAULT_RULES",
    "DEFAULT_SKIP_ENVS",
    "EnvironmentRule",
    "RawEntity",
    "StructuredRecordMapping",
    "extract_from_latex",
    "extract_refs_rule_based",
    "ingest_structured",
    "to_input_kg",
]


@dataclass(frozen=True)
class EnvironmentRule:
    """Maps one LaTeX environment onto an entity type."""

    env: str
    entity_type: EntityType
    attach_following_proof: bool = False


DEFAULT_RULES: tuple[EnvironmentRule, ...] = (
    EnvironmentRule("theorem", EntityType.THEOREM, attach_following_proof=True),
    EnvironmentRule("proposition", EntityType.THEOREM, attach_following_proof=True),
    EnvironmentRule("lemma", EntityType.THEOREM, attach_following_proof=True),
    EnvironmentRule("corollary", EntityType.THEOREM, attach_following_proof=True),
    EnvironmentRule("definition", EntityType.DEFINITION),
    EnvironmentRule("problem", EntityType.PROBLEM),
    EnvironmentRule("exercise", EntityType.PROBLEM),
    EnvironmentRule("example", EntityType.PROBLEM),
    EnvironmentRule("remark", EntityType.OTHER),
    EnvironmentRule("notation", EntityType.OTHER),
)

# environments whose bodies must never be scanned for entities
DEFAULT_SKIP_ENVS: tuple[str, ...] = ("verbatim", "lstlisting", "minted")

PROOF_ENV = "proof"

# ref syntaxes recovered by rule: \ref{...}, \cref{...}/\Cref{...}, [[wiki links]]
DEFAULT_REF_PATTERNS: tuple[str, ...] = (
    r"\\ref\{([^}]*)\}",
    r"\\[cC]ref\{([^}]*)\}",
    r"\[\[([^\]|#]+)(?:#[^\]|]*)?(?:\|[^\]]*)?\]\]",
)

_LABEL_RE = re.compile(r"\\label\{([^}]*)\}")


@dataclass
class RawEntity:
    """Pre-KG extraction record.

    ``proof_contents`` holds proofs for theorem-typed raws and solutions for
    problem-typed raws (one list of content strings per derivation).
    """

    entity_type: EntityType
    env: str = ""
    label: str = ""
    title_seed: str = ""
    contents: list[str] = dc_field(default_factory=list)
    proof_contents: list[list[str]] = dc_field(default_factory=list)
    refs: list[str] = dc_field(default_factory=list)
    source: str = ""
    offset: int = 0


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _pad(text: str, start: int, end: int) -> str:
    """Replace a span with spaces, preserving every offset."""
    return text[:start] + re.sub(r"[^\n]", " ", text[start:end]) + text[end:]


def _strip_comments(text: str, protect: list[tuple[int, int]]) -> str:
    """Blank out unescaped %-comments outside protected spans."""
    out = text
    for match in re.finditer(r"(?<!\\)%[^\n]*", text):
        if any(s <= match.start() < e for s, e in protect):
            continue
        out = _pad(out, match.start(), match.end())
    return out


def _find_env_spans(text: str, envs: Sequence[str]) -> list[tuple[int, int]]:
    spans = []
    for env in envs:
        pattern = re.compile(
            r"\\begin\{" + re.escape(env) + r"\}.*?\\end\{" + re.escape(env) + r"\}",
            re.DOTALL,
        )
        spans.extend(m.span() for m in pattern.finditer(text))
    return spans


def _matching_end(text: str, env: str, body_start: int, begin_pos: int) -> tuple[int, int]:
    """Return (body_end, scan_resume) for the balanced \\end of ``env``.

    Raises UnbalancedEnvironmentError when the environment never closes.
    """
    token = re.compile(
        r"\\(begin|end)\{" + re.escape(env) + r"\}"
    )
    depth = 1
    for match in token.finditer(text, body_start):
        depth += 1 if match.group(1) == "begin" else -1
        if depth == 0:
            return match.start(), match.end()
    raise UnbalancedEnvironmentError(env, _byte_offset(text, begin_pos))


def _clean_body(body: str) -> tuple[str, str]:
    """Strip \\label commands out of a body; returns (text, first label)."""
    labels = _LABEL_RE.findall(body)
    cleaned = _LABEL_RE.sub("", body)
    return cleaned.strip(), labels[0] if labels else ""


def extract_from_latex(
    source: str,
    rules: Sequence[EnvironmentRule] = DEFAULT_RULES,
    *,
    skip_envs: Sequence[str] = DEFAULT_SKIP_ENVS,
    ref_patterns: Sequence[str] | None = None,
    source_tag: str = "latex",
) -> list[RawEntity]:
    """Extract raw entities from a LaTeX source string.

    Matches ``\\begin{env}...\\end{env}`` for every rule environment
    (starred variants included), seeds titles from the optional bracket
    argument, records ``\\label`` values, attaches immediately following
    ``proof`` environments to theorem-typed matches, and harvests rule-based
    refs from the extracted contents.
    """
    if not rules:
        raise ValueError("at least one environment rule is required")
    rule_map = {r.env: r for r in rules}

    verbatim_spans = _find_env_spans(source, skip_envs)
    content_text = _strip_comments(source, verbatim_spans)
    mask_text = content_text
    for start, end in verbatim_spans:
        mask_text = _pad(mask_text, start, end)

    env_alt = "|".join(re.escape(e) for e in rule_map)
    begin_re = re.compile(
        r"\\begin\{(" + env_alt + r")(\*?)\}(?:\[([^\]]*)\])?"
    )
    proof_re = re.compile(
        r"\s*\\begin\{" + PROOF_ENV + r"(\*?)\}(?:\[([^\]]*)\])?"
    )

    raws: list[RawEntity] = []
    consumed: list[tuple[int, int]] = []
    cursor = 0
    for match in begin_re.finditer(mask_text):
        if match.start() < cursor:
            continue  # inside a previously consumed body
        env, star, title_seed = match.group(1), match.group(2), match.group(3)
        full_env = env + star
        body_start = match.end()
        body_end, resume = _matching_end(mask_text, full_env, body_start, match.start())
        body, label = _clean_body(content_text[body_start:body_end])
        rule = rule_map[env]
        raw = RawEntity(
            entity_type=rule.entity_type,
            env=full_env,
            label=label,
            title_seed=(title_seed or "").strip(),
            contents=[body] if body else [],
            source=source_tag,
            offset=match.start(),
        )
        cursor = resume

        if rule.entity_type is EntityType.THEOREM and rule.attach_following_proof:
            while True:
                proof_match = proof_re.match(mask_text, cursor)
                if proof_match is None:
                    break
                p_env = PROOF_ENV + proof_match.group(1)
                p_start = proof_match.end()
                p_end, p_resume = _matching_end(
                    mask_text, p_env, p_start, proof_match.start()
                )
                proof_body, _ = _clean_body(content_text[p_start:p_end])
                raw.proof_contents.append([proof_body] if proof_body else [])
                cursor = p_resume

        raw.refs = extract_refs_rule_based(raw.contents, ref_patterns)
        raws.append(raw)
        consumed.append((match.start(), cursor))

    _check_stray_ends(mask_text, rule_map, consumed)
    return raws


def _check_stray_ends(
    mask_text: str,
    rule_map: dict[str, EnvironmentRule],
    consumed: list[tuple[int, int]],
) -> None:
    env_alt = "|".join(re.escape(e) for e in rule_map)
    end_re = re.compile(r"\\end\{(" + env_alt + r")\*?\}")
    for match in end_re.finditer(mask_text):
        if any(s <= match.start() < e for s, e in consumed):
            continue
        raise UnbalancedEnvironmentError(
            match.group(1), _byte_offset(mask_text, match.start())
        )


def extract_refs_rule_based(
    contents: str | Iterable[str],
    patterns: Sequence[str] | None = None,
) -> list[str]:
    """Harvest reference titles from content strings, in order, de-duplicated.

    Each pattern must expose the referenced title as capture group 1;
    ``\\ref``/``\\cref`` groups are split on commas.
    """
    if isinstance(contents, str):
        contents = [contents]
    compiled = [re.compile(p) for p in (patterns or DEFAULT_REF_PATTERNS)]

    refs: list[str] = []
    seen: set[str] = set()
    for text in contents:
        found: list[tuple[int, str]] = []
        for pattern in compiled:
            for match in pattern.finditer(text):
                raw = match.group(1)
                parts = raw.split(",") if "," in raw else [raw]
                found.extend((match.start(), part.strip()) for part in parts)
        for _, title in sorted(found, key=lambda item: item[0]):
            if title and title not in seen:
                seen.add(title)
                refs.append(title)
    return refs


@dataclass(frozen=True)
class StructuredRecordMapping:
    """Binds record keys of a structured dump to raw-entity fields.

    Exactly one of ``entity_type`` (fixed type for every record) or
    ``type_key`` (per-record type tag) must be set. ``derivation_key``
    feeds proofs for theorem-typed records and solutions for problem-typed
    ones.
    """

    contents_key: str
    entity_type: EntityType | None = None
    type_key: str | None = None
    title_key: str | None = None
    label_key: str | None = None
    refs_key: str | None = None
    derivation_key: str | None = None

    def __post_init__(self) -> None:
        if (self.entity_type is None) == (self.type_key is None):
            raise ValueError("set exactly one of entity_type or type_key")


def _as_contents(value, index: int, key: str) -> list[str]:
    if isinstance(value, str):
        return [value] if value else []
    if isinstance(value, list) and all(isinstance(x, str) for x in value):
        return list(value)
    raise InvalidEntityError(
        f"record {index}: field {key!r} must be a string or list of strings"
    )


def ingest_structured(
    records: Iterable[dict],
    mapping: StructuredRecordMapping,
    source: str,
) -> list[RawEntity]:
    """Turn structured records (ProofWiki dumps, QA datasets) into raw entities."""
    raws: list[RawEntity] = []
    for index, record in enumerate(records):
        def bound(key: str | None, required: bool = False):
            if key is None:
                return None
            if key not in record:
                if required:
                    raise MissingBoundFieldError(index, key)
                return None
            return record[key]

        contents_value = record.get(mapping.contents_key)
        if contents_value is None:
            raise MissingBoundFieldError(index, mapping.contents_key)

        if mapping.entity_type is not None:
            entity_type = mapping.entity_type
        else:
            type_value = bound(mapping.type_key, required=True)
            try:
                entity_type = EntityType(type_value)
            except ValueError:
                raise InvalidEntityError(
                    f"record {index}: unknown entity type {type_value!r}"
                ) from None

        raw = RawEntity(
            entity_type=entity_type,
            label=str(bound(mapping.label_key) or ""),
            title_seed=str(bound(mapping.title_key) or ""),
            contents=_as_contents(contents_value, index, mapping.contents_key),
            source=source,
        )
        refs_value = bound(mapping.refs_key)
        if refs_value is not None:
            raw.refs = _as_contents(refs_value, index, mapping.refs_key)
        derivation = bound(mapping.derivation_key)
        if derivation is not None:
            raw.proof_contents.append(
                _as_contents(derivation, index, mapping.derivation_key)
            )
        raws.append(raw)
    return raws


def to_input_kg(raws: Sequence[RawEntity]) -> KnowledgeGraph:
    """Assemble raw entities into an Input KG with dense ids.

    Rule-based refs land in ``refs`` with the tactic maps left empty: they
    become edges only after augmentation assigns tactics. Derivations become
    proofs on theorems and solutions on problems, each with its own
    rule-extracted refs.
    """
    kg = KnowledgeGraph()
    for position, raw in enumerate(raws):
        records = [
            DerivationRecord(
                contents=list(chunk),
                refs=extract_refs_rule_based(chunk),
            )
            for chunk in raw.proof_contents
        ]
        refs: list[str] = []
        for candidate in list(raw.refs) + extract_refs_rule_based(raw.contents):
            if candidate not in refs:
                refs.append(candidate)
        entity = Entity(
            id=position,
            type=raw.entity_type,
            label=raw.label,
            title=raw.title_seed,
            contents=list(raw.contents),
            refs=refs,
            source=raw.source,
            proofs=records if raw.entity_type is EntityType.THEOREM else [],
            solutions=records if raw.entity_type is EntityType.PROBLEM else [],
        )
        if records and raw.entity_type not in (EntityType.THEOREM, EntityType.PROBLEM):
            raise InvalidEntityError(
                f"raw entity {position}: derivations are only legal on "
                f"theorem or problem entities"
            )
        kg.add_entity(entity)
    warnings = kg.rebuild_edges()
    for message in warnings:
        logger.warning("input KG: %s", message)
    return kg
