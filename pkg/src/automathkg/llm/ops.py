"""Response parsing, entity augmentation, and fusion judgments.

Every parser here is intentionally strict: a response that does not carry
exactly one usable answer raises, the caller retries with a one-line format
reminder, and after the retry budget the failure is recorded instead of
guessed away.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor

from ..errors import (
    AmbiguousFieldError,
    IdNotInCandidatesError,
    ParseFailureError,
    UndecidableResponseError,
    UnknownLabelError,
)
from ..kg import (
    BodySegment,
    DerivationRecord,
    Entity,
    EntityType,
    KnowledgeGraph,
    MathField,
    TacticLabel,
    normalize_title,
)
from .backends import LlmBackend, LlmParams
from .templates import Prompt, TemplateId, render_template

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_RETRIES",
    "augment_entity",
    "augment_graph",
    "entity_block",
    "judge_best_candidate",
    "judge_consistency",
    "parse_bodylist_response",
    "parse_candidate_id",
    "parse_field_response",
    "parse_refs_response",
    "parse_tactics_response",
    "parse_title_response",
    "parse_yes_no",
]

DEFAULT_RETRIES = 3

_KIND = {
    EntityType.DEFINITION: "definition",
    EntityType.THEOREM: "theorem",
    EntityType.PROBLEM: "problem",
}

_PUNCT_EDGE = "\"'`.,;:!?*()[]{}"


def _first_line(text: str) -> str:
    for line in text.splitlines():
        stripped = line.strip().lstrip("-* ").strip()
        if stripped:
            return stripped
    return ""


def parse_title_response(text: str) -> str:
    """First non-empty line, unquoted; empty responses are a parse failure."""
    line = _first_line(text).strip(_PUNCT_EDGE + " ")
    line = " ".join(line.split())
    if not line:
        raise ParseFailureError("empty title response")
    return line


def parse_field_response(text: str) -> MathField:
    """The response must name exactly one of the seven field choices."""
    normalized = " ".join(re.sub(r"[^a-z ]", " ", text.lower()).split())
    matches = [f for f in MathField if f.value in normalized]
    if len(matches) != 1:
        raise AmbiguousFieldError(
            f"expected exactly one field name, found {len(matches)}"
        )
    return matches[0]


def _extract_json(text: str, opener: str, closer: str):
    start = text.find(opener)
    end = text.rfind(closer)
    if start == -1 or end == -1 or end < start:
        raise ParseFailureError(f"no {opener}...{closer} block in response")
    try:
        return json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ParseFailureError(f"malformed JSON block: {exc}") from None


def parse_bodylist_response(text: str) -> list[BodySegment]:
    """Parse a JSON array of description/action pairs into body segments."""
    data = _extract_json(text, "[", "]")
    if not isinstance(data, list) or not data:
        raise ParseFailureError("bodylist response must be a non-empty array")
    segments = []
    for item in data:
        if not isinstance(item, dict) or "description" not in item or "action" not in item:
            raise ParseFailureError("bodylist items need description and action")
        description = str(item["description"]).strip()
        if not description:
            raise ParseFailureError("bodylist item has an empty description")
        try:
            action = TacticLabel(str(item["action"]).strip().lower())
        except ValueError:
            raise UnknownLabelError(
                f"unknown bodylist action {item['action']!r}"
            ) from None
        segments.append(BodySegment(description, action))
    return segments


def parse_refs_response(text: str) -> list[str]:
    """Lines shaped ``definition: ...`` / ``theorem: ...``, normalized, deduped.

    An empty response (or one with no usable line) is a legal empty list:
    many problems reference nothing.
    """
    refs: list[str] = []
    seen: set[str] = set()
    for line in text.splitlines():
        candidate = line.strip().lstrip("-*0123456789. ").strip(_PUNCT_EDGE + " ")
        if not candidate:
            continue
        if candidate.lower().startswith(("definition:", "theorem:")):
            normalized = normalize_title(candidate)
            if normalized not in seen:
                seen.add(normalized)
                refs.append(normalized)
    return refs


def parse_tactics_response(text: str, refs: list[str]) -> dict[str, TacticLabel]:
    """Parse a JSON object mapping references to tactic labels.

    Keys are matched against ``refs`` up to title normalization and stored
    under the refs spelling; unmatched keys keep their normalized spelling
    (the caller unions them into refs).
    """
    data = _extract_json(text, "{", "}")
    if not isinstance(data, dict):
        raise ParseFailureError("tactics response must be a JSON object")
    by_norm = {normalize_title(r): r for r in refs}
    out: dict[str, TacticLabel] = {}
    for key, value in data.items():
        try:
            tactic = TacticLabel(str(value).strip().lower())
        except ValueError:
            raise UnknownLabelError(f"unknown tactic {value!r}") from None
        norm = normalize_title(str(key))
        if not norm:
            raise ParseFailureError("tactics response has an empty reference key")
        out[by_norm.get(norm, norm)] = tactic
    return out


def parse_yes_no(text: str) -> bool:
    token = _first_line(text).split(" ")[0].strip(_PUNCT_EDGE).lower() if text else ""
    if token == "yes":
        return True
    if token == "no":
        return False
    raise UndecidableResponseError(f"expected yes/no, got {text!r}")


def parse_candidate_id(text: str, candidate_ids: set[int]) -> int:
    match = re.search(r"-?\d+", text)
    if match is None:
        raise UndecidableResponseError(f"no id number in {text!r}")
    value = int(match.group(0))
    if value not in candidate_ids:
        raise IdNotInCandidatesError(
            f"id {value} is not one of the candidates {sorted(candidate_ids)}"
        )
    return value


_REMINDERS: dict[TemplateId, str] = {}


def _reminder_for(template: TemplateId) -> str:
    name = template.value
    if name.startswith("title"):
        return "Reminder: answer with the title only, on a single line."
    if name.startswith("field"):
        return "Reminder: answer with exactly one of the listed field names."
    if name.startswith("bodylist"):
        return (
            "Reminder: answer with a JSON array of objects, each with a "
            '"description" and an "action" label from the list.'
        )
    if name.startswith("refs"):
        return (
            'Reminder: output one reference per line as "definition: ..." or '
            '"theorem: ...", or an empty list.'
        )
    if name.startswith("references_tactics"):
        return (
            "Reminder: answer with a JSON object mapping each reference to "
            "one label from the list."
        )
    if template is TemplateId.FUSION_STEP4:
        return 'Reminder: answer "yes" or "no" only.'
    if template is TemplateId.FUSION_STEP5:
        return "Reminder: answer with the id number of one candidate."
    if template is TemplateId.COMPLETION_CLASSIFY:
        return "Reminder: answer with exactly one of the listed categories."
    return "Reminder: follow the requested output format exactly."


def ask_with_retries(
    backend: LlmBackend,
    prompt: Prompt,
    parse,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
):
    """Call the backend up to ``retries`` times, re-prompting with a reminder."""
    last: Exception | None = None
    current = prompt
    for attempt in range(retries):
        response = backend.complete(current, params)
        try:
            return parse(response)
        except ParseFailureError as exc:
            last = exc
            if attempt + 1 < retries:
                current = Prompt(
                    template=prompt.template,
                    rendered=prompt.rendered + "\n\n" + _reminder_for(prompt.template),
                    context_digest=prompt.context_digest,
                )
    assert last is not None
    raise last


def _union_refs(refs: list[str], new: list[str]) -> list[str]:
    known = {normalize_title(r) for r in refs}
    for candidate in new:
        norm = normalize_title(candidate)
        if norm and norm not in known:
            known.add(norm)
            refs.append(candidate)
    return refs


def _merge_tactics(
    refs: list[str], tactics: dict[str, TacticLabel], new: dict[str, TacticLabel]
) -> None:
    _union_refs(refs, list(new))
    by_norm = {normalize_title(r): r for r in refs}
    for key, tactic in new.items():
        spelling = by_norm[normalize_title(key)]
        tactics.setdefault(spelling, tactic)


def _untagged(refs: list[str], tactics: dict[str, TacticLabel]) -> list[str]:
    return [r for r in refs if r not in tactics]


def augment_entity(
    entity: Entity,
    backend: LlmBackend,
    *,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
) -> Entity:
    """Fill missing attributes of one entity through the LLM backend.

    Only unset attributes are written; rule-extracted refs are never
    overwritten, LLM-discovered ones are unioned in. A parse failure after
    the retry budget leaves that attribute alone and is logged, so a noisy
    backend degrades augmentation instead of aborting it.
    """
    e = entity.clone()
    kind = _KIND.get(e.type)

    def ask(template: TemplateId, context: dict, parse):
        prompt = render_template(template, context)
        try:
            return ask_with_retries(backend, prompt, parse, retries, params)
        except ParseFailureError as exc:
            logger.warning(
                "entity %d: %s left unfilled after %d attempts (%s)",
                e.id, template.value, retries, exc,
            )
            return None

    if kind is not None:
        if not e.title:
            title = ask(
                TemplateId(f"title_{kind}"), {"content": e.contents},
                parse_title_response,
            )
            if title:
                e.title = title
        if e.field is None:
            e.field = ask(
                TemplateId(f"field_{kind}"), {"content": e.contents},
                parse_field_response,
            )
        if e.type in (EntityType.DEFINITION, EntityType.THEOREM):
            if not e.bodylist and e.contents:
                e.bodylist = ask(
                    TemplateId(f"bodylist_{kind}"), {"content": e.contents},
                    parse_bodylist_response,
                ) or []
            for record in e.proofs:
                if not record.bodylist and record.contents:
                    record.bodylist = ask(
                        TemplateId.BODYLIST_PROOF, {"content": record.contents},
                        parse_bodylist_response,
                    ) or []
        if e.type is EntityType.PROBLEM:
            found = ask(
                TemplateId.REFS_PROBLEM, {"content": e.contents},
                parse_refs_response,
            )
            if found:
                _union_refs(e.refs, found)
            for record in e.solutions:
                found = ask(
                    TemplateId.REFS_SOLUTION, {"content": record.contents},
                    parse_refs_response,
                )
                if found:
                    _union_refs(record.refs, found)

        missing = _untagged(e.refs, e.references_tactics)
        if missing:
            tactics = ask(
                TemplateId(f"references_tactics_{kind}"),
                {"content": e.contents, "refs": missing},
                lambda text: parse_tactics_response(text, e.refs),
            )
            if tactics:
                _merge_tactics(e.refs, e.references_tactics, tactics)
        for template, records in (
            (TemplateId.TACTICS_PROOF, e.proofs),
            (TemplateId.TACTICS_SOLUTION, e.solutions),
        ):
            for record in records:
                missing = _untagged(record.refs, record.references_tactics)
                if not missing:
                    continue
                tactics = ask(
                    template,
                    {"content": record.contents, "refs": missing},
                    lambda text, r=record: parse_tactics_response(text, r.refs),
                )
                if tactics:
                    _merge_tactics(record.refs, record.references_tactics, tactics)

    if not e.title:
        # deterministic fallback keeps the nonempty-title invariant
        fallback = e.label or (e.contents[0][:60].strip() if e.contents else f"entity {e.id}")
        e.title = fallback
    return e


def augment_graph(
    kg: KnowledgeGraph,
    backend: LlmBackend,
    *,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
    parallelism: int = 1,
) -> list[str]:
    """Augment every entity in place, re-index titles, rebuild edges.

    Entity augmentations are independent, so they may run on a small thread
    pool; results are applied in ascending id order either way. Returns the
    warning list (title collisions plus edge-origin warnings).
    """
    ids = sorted(kg.entities)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            augmented = list(
                pool.map(
                    lambda eid: augment_entity(
                        kg.entities[eid], backend, retries=retries, params=params
                    ),
                    ids,
                )
            )
    else:
        augmented = [
            augment_entity(kg.entities[eid], backend, retries=retries, params=params)
            for eid in ids
        ]

    warnings: list[str] = []
    for entity in augmented:
        kg.entities[entity.id] = entity
        if not kg.reindex_title(entity.id):
            warnings.append(
                f"entity {entity.id}: augmented title {entity.title!r} collides; "
                f"keeping the earlier index binding"
            )
    warnings.extend(kg.rebuild_edges())
    return warnings


def entity_block(entity: Entity) -> list[str]:
    """Compact textual form of an entity for judgment prompts."""
    lines = [f"title: {entity.title}"]
    lines.extend(entity.contents)
    return lines


def judge_consistency(
    backend: LlmBackend,
    first: Entity,
    second: Entity,
    *,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
) -> bool:
    """Do two entities state the same piece of mathematics?"""
    prompt = render_template(
        TemplateId.FUSION_STEP4,
        {"first theorem": entity_block(first), "second theorem": entity_block(second)},
    )
    return ask_with_retries(backend, prompt, parse_yes_no, retries, params)


def judge_best_candidate(
    backend: LlmBackend,
    new_entity: Entity,
    candidates: list[Entity],
    *,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
) -> int:
    """Pick, among several same-meaning candidates, the one to merge into."""
    if not candidates:
        raise ValueError("judge_best_candidate needs at least one candidate")
    candidate_lines = [
        f"id {c.id}: {c.title}. " + " ".join(c.contents) for c in candidates
    ]
    prompt = render_template(
        TemplateId.FUSION_STEP5,
        {"new theorem": entity_block(new_entity), "candidates": candidate_lines},
    )
    ids = {c.id for c in candidates}
    return ask_with_retries(
        backend, prompt, lambda text: parse_candidate_id(text, ids), retries, params
    )
