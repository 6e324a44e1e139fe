"""Knowledge completion: derive missing proofs and solutions.

Incomplete entities (theorems without proofs, problems without solutions)
are completed by classifying the task, generating knowledge points,
retrieving supporting entities in two stages (exact title lookup, then
vector search), and running an answer/calibrate round loop against the
language model until the calibration rules pass or the round budget is
spent.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable

from .embedding import Embedder
from .errors import (
    DataError,
    DegenerateVectorError,
    EmptyIndexError,
    EntityNotIncompleteError,
    UndecidableResponseError,
)
from .kg import (
    DerivationRecord,
    Entity,
    EntityType,
    KnowledgeGraph,
    normalize_title,
)
from .llm import LlmBackend, ask_with_retries
from .llm.backends import LlmParams
from .llm.ops import DEFAULT_RETRIES
from .llm.templates import TemplateId, render_template
from .vectordb import SearchHit, VectorDb, embed_for_db

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROUNDS = 3
DEFAULT_FUZZY_K = 3

__all__ = [
    "CalibrationRule",
    "CompletionResult",
    "DEFAULT_FUZZY_K",
    "DEFAULT_MAX_ROUNDS",
    "DEFAULT_RULES",
    "KnowledgePoint",
    "ProblemCategory",
    "RetrievalBundle",
    "RoundTrace",
    "builtin_rules",
    "classify_problem",
    "complete_entity",
    "find_incomplete",
    "generate_knowledge_points",
    "two_stage_retrieve",
    "write_back",
]


class ProblemCategory(str, Enum):
    APPLICATION = "application"
    CALCULATION = "calculation"
    PROOF = "proof"


@dataclass(frozen=True)
class KnowledgePoint:
    """One knowledge point named by the model, optionally typed by prefix."""

    text: str
    kind_hint: str | None = None  # "definition" | "theorem" | None


@dataclass
class RetrievalBundle:
    """What the two retrieval stages found for one entity."""

    points: list[KnowledgePoint] = dc_field(default_factory=list)
    exact_ids: list[int] = dc_field(default_factory=list)
    fuzzy_hits: list[SearchHit] = dc_field(default_factory=list)
    selected_ids: list[int] = dc_field(default_factory=list)
    selected_titles: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "points": [
                {"text": p.text, "kind_hint": p.kind_hint} for p in self.points
            ],
            "exact_ids": list(self.exact_ids),
            "fuzzy_hits": [
                {"entity_id": h.entity_id, "score": h.score} for h in self.fuzzy_hits
            ],
            "selected_ids": list(self.selected_ids),
            "selected_titles": list(self.selected_titles),
        }


@dataclass(frozen=True)
class RoundTrace:
    """One answer round: the answer, its violations, the error summary."""

    answer: str
    violations: tuple[str, ...]
    error_summary: str


@dataclass
class CompletionResult:
    """Outcome of the round loop for one entity."""

    entity_id: int
    category: ProblemCategory
    status: str  # "complete" | "failed"
    trace: list[RoundTrace] = dc_field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.trace)

    @property
    def answer(self) -> str:
        return self.trace[-1].answer if self.trace else ""

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "category": self.category.value,
            "status": self.status,
            "rounds": self.rounds,
            "trace": [
                {
                    "answer": t.answer,
                    "violations": list(t.violations),
                    "error_summary": t.error_summary,
                }
                for t in self.trace
            ],
        }


@dataclass(frozen=True)
class CalibrationRule:
    """A deterministic check on a candidate answer.

    ``check(answer, entity)`` returns a violation message or None. A rule
    with ``categories=None`` applies to every category.
    """

    name: str
    check: Callable[[str, Entity], str | None]
    categories: frozenset[ProblemCategory] | None = None

    def applies_to(self, category: ProblemCategory) -> bool:
        return self.categories is None or category in self.categories


def _check_nonempty(answer: str, entity: Entity) -> str | None:
    if not answer.strip():
        return "the answer is empty"
    return None


_PROOF_MARKERS = ("qed", "q.e.d", "∎", "completes the proof", "as required")


def _check_final_statement(answer: str, entity: Entity) -> str | None:
    lowered = answer.lower()
    if not any(marker in lowered for marker in _PROOF_MARKERS):
        return "the proof does not end with a concluding statement"
    return None


_NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:\s*/\s*\d+)?")


def _check_numeric_result(answer: str, entity: Entity) -> str | None:
    if _NUMBER.search(answer) is None:
        return "the answer does not state a numeric result"
    return None


def _significant_tokens(text: str) -> set[str]:
    return {t for t in re.findall(r"[a-z0-9]+", text.lower()) if len(t) >= 4}


def _check_restates_quantity(answer: str, entity: Entity) -> str | None:
    statement = " ".join(entity.contents)
    sentences = [s for s in re.split(r"(?<=[.?!])\s+", statement) if s.strip()]
    wanted = _significant_tokens(sentences[-1]) if sentences else set()
    if not wanted:
        return None
    if wanted & _significant_tokens(answer):
        return None
    return "the answer does not restate the asked quantity"


def builtin_rules() -> list[CalibrationRule]:
    """The default calibration rule set."""
    return [
        CalibrationRule("nonempty-answer", _check_nonempty),
        CalibrationRule(
            "contains-final-statement",
            _check_final_statement,
            frozenset({ProblemCategory.PROOF}),
        ),
        CalibrationRule(
            "parseable-numeric-result",
            _check_numeric_result,
            frozenset({ProblemCategory.CALCULATION}),
        ),
        CalibrationRule(
            "restates-asked-quantity",
            _check_restates_quantity,
            frozenset({ProblemCategory.APPLICATION}),
        ),
    ]


DEFAULT_RULES = builtin_rules()


def find_incomplete(kg: KnowledgeGraph) -> list[Entity]:
    """Theorems without proofs and problems without solutions, id-ascending."""
    out = []
    for entity in kg.iter_entities():
        if entity.type is EntityType.THEOREM and not entity.proofs:
            out.append(entity)
        elif entity.type is EntityType.PROBLEM and not entity.solutions:
            out.append(entity)
    return out


def _is_incomplete(entity: Entity) -> bool:
    if entity.type is EntityType.THEOREM:
        return not entity.proofs
    if entity.type is EntityType.PROBLEM:
        return not entity.solutions
    return False


def _parse_category(text: str) -> ProblemCategory:
    lowered = text.lower()
    present = [c for c in ProblemCategory if c.value in lowered]
    if len(present) != 1:
        raise UndecidableResponseError(
            f"expected exactly one category, found {[c.value for c in present]}"
        )
    return present[0]


def classify_problem(
    backend: LlmBackend,
    entity: Entity,
    *,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
) -> ProblemCategory:
    """Classify a problem as application, calculation, or proof."""
    prompt = render_template(
        TemplateId.COMPLETION_CLASSIFY, {"problem": " ".join(entity.contents)}
    )
    return ask_with_retries(backend, prompt, _parse_category, retries=retries, params=params)


_BULLET = "-*0123456789. "


def _parse_knowledge_points(text: str) -> list[KnowledgePoint]:
    points: list[KnowledgePoint] = []
    seen: set[str] = set()
    for line in text.splitlines():
        cleaned = line.strip().lstrip(_BULLET).strip()
        if not cleaned:
            continue
        lowered = cleaned.lower()
        kind = None
        if lowered.startswith("definition:"):
            kind = "definition"
            cleaned = normalize_title(cleaned)
        elif lowered.startswith("theorem:"):
            kind = "theorem"
            cleaned = normalize_title(cleaned)
        key = cleaned.lower()
        if key in seen:
            continue
        seen.add(key)
        points.append(KnowledgePoint(text=cleaned, kind_hint=kind))
    return points


def generate_knowledge_points(
    backend: LlmBackend,
    entity: Entity,
    *,
    params: LlmParams | None = None,
) -> list[KnowledgePoint]:
    """Ask the model which knowledge points the entity depends on."""
    prompt = render_template(
        TemplateId.COMPLETION_KNOWLEDGE_POINTS, {"problem": " ".join(entity.contents)}
    )
    return _parse_knowledge_points(backend.complete(prompt, params))


def two_stage_retrieve(
    kg: KnowledgeGraph,
    vd: VectorDb | None,
    embedder: Embedder | None,
    points: list[KnowledgePoint],
    seed_id: int,
    fuzzy_k: int = DEFAULT_FUZZY_K,
) -> RetrievalBundle:
    """Exact title lookup per point, then vector search around the misses.

    Stage two embeds both the point texts and the stage-one hits, searches
    the index for each, and unions the results keeping each entity's best
    score. Without an index (or an empty one) only stage one runs.
    """
    bundle = RetrievalBundle(points=list(points))
    for point in points:
        hit = kg.exact_lookup(normalize_title(point.text))
        if hit is not None and hit != seed_id and hit not in bundle.exact_ids:
            bundle.exact_ids.append(hit)

    if vd is not None and embedder is not None and len(vd) > 0:
        queries = []
        for point in points:
            try:
                queries.append(embedder.embed_text(point.text))
            except DegenerateVectorError:
                continue
        for eid in bundle.exact_ids:
            try:
                queries.append(embed_for_db(vd, embedder, kg.entity(eid)))
            except DegenerateVectorError:
                continue
        best: dict[int, float] = {}
        for query in queries:
            try:
                hits = vd.top_k(query, fuzzy_k, exclude={seed_id})
            except EmptyIndexError:
                break
            for hit in hits:
                if hit.score > best.get(hit.entity_id, float("-inf")):
                    best[hit.entity_id] = hit.score
        bundle.fuzzy_hits = [
            SearchHit(eid, score)
            for eid, score in sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
        ]

    for eid in bundle.exact_ids:
        if eid not in bundle.selected_ids:
            bundle.selected_ids.append(eid)
    for hit in bundle.fuzzy_hits:
        if hit.entity_id != seed_id and hit.entity_id not in bundle.selected_ids:
            bundle.selected_ids.append(hit.entity_id)
    bundle.selected_titles = [kg.entity(eid).title for eid in bundle.selected_ids]
    return bundle


def _knowledge_lines(kg: KnowledgeGraph, bundle: RetrievalBundle) -> list[str]:
    lines = []
    for eid in bundle.selected_ids:
        entity = kg.entity(eid)
        lines.append(f"{entity.title}: {' '.join(entity.contents)}")
    return lines


def complete_entity(
    kg: KnowledgeGraph,
    entity_id: int,
    backend: LlmBackend,
    *,
    vd: VectorDb | None = None,
    embedder: Embedder | None = None,
    rules: list[CalibrationRule] | None = None,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    fuzzy_k: int = DEFAULT_FUZZY_K,
    retries: int = DEFAULT_RETRIES,
    params: LlmParams | None = None,
) -> tuple[CompletionResult, RetrievalBundle]:
    """Run the full completion loop for one incomplete entity.

    Each round asks for an answer (with the previous round's error summary,
    if any) and checks it against the applicable calibration rules; a
    violating answer triggers one calibration call whose output seeds the
    next round. The loop stops on the first clean answer or after
    ``max_rounds`` rounds, so at most ``2 * max_rounds`` model calls are
    made.
    """
    entity = kg.entity(entity_id)
    if not _is_incomplete(entity):
        raise EntityNotIncompleteError(
            f"entity {entity_id} already has its derivations"
        )
    rules = DEFAULT_RULES if rules is None else rules

    if entity.type is EntityType.THEOREM:
        category = ProblemCategory.PROOF
    else:
        category = classify_problem(backend, entity, retries=retries, params=params)

    points = generate_knowledge_points(backend, entity, params=params)
    bundle = two_stage_retrieve(kg, vd, embedder, points, entity_id, fuzzy_k)

    active_rules = [r for r in rules if r.applies_to(category)]
    problem_text = " ".join(entity.contents)
    knowledge = _knowledge_lines(kg, bundle)
    result = CompletionResult(entity_id=entity_id, category=category, status="failed")

    error_summary = ""
    for _ in range(max_rounds):
        context: dict = {"problem": problem_text, "knowledge": knowledge}
        if error_summary:
            context["error summary"] = error_summary
        answer = backend.complete(
            render_template(TemplateId.COMPLETION_ANSWER, context), params
        )
        violations = tuple(
            v for rule in active_rules if (v := rule.check(answer, entity)) is not None
        )
        if not violations:
            result.trace.append(RoundTrace(answer, (), ""))
            result.status = "complete"
            break
        calibrate = render_template(
            TemplateId.COMPLETION_CALIBRATE,
            {
                "problem": problem_text,
                "answer": answer,
                "violations": list(violations),
            },
        )
        error_summary = backend.complete(calibrate, params).strip() or "; ".join(
            violations
        )
        result.trace.append(RoundTrace(answer, violations, error_summary))
    return result, bundle


def write_back(
    kg: KnowledgeGraph,
    entity_id: int,
    result: CompletionResult,
    bundle: RetrievalBundle,
) -> None:
    """Attach a completed derivation to its entity.

    Only a result with status ``complete`` may be written, and only while
    the entity is still incomplete. The derivation's references are the
    retrieved entity titles; the entity's source becomes ``completion``.
    """
    if result.status != "complete":
        raise DataError(
            f"completion of entity {entity_id} is {result.status!r}; nothing to write"
        )
    entity = kg.entity(entity_id)
    if not _is_incomplete(entity):
        raise EntityNotIncompleteError(
            f"entity {entity_id} already has its derivations"
        )
    record = DerivationRecord(
        contents=[result.answer],
        refs=[normalize_title(t) for t in bundle.selected_titles if t.strip()],
    )
    if entity.type is EntityType.THEOREM:
        entity.proofs.append(record)
    else:
        entity.solutions.append(record)
    entity.source = "completion"
