"""Prompt templates and deterministic context rendering.

Template wordings are fixed data: tests pin them, and scripted mock
fixtures key on the digest of the rendered prompt, so any change here is a
format break. Context values render as labelled blocks under the template
text; lists become ``- `` bullets, maps become ``key -> value`` bullets.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

from ..errors import MissingContextError

__all__ = ["TemplateId", "Prompt", "render_template", "template_text"]


class TemplateId(str, Enum):
    TITLE_DEFINITION = "title_definition"
    TITLE_THEOREM = "title_theorem"
    TITLE_PROBLEM = "title_problem"
    FIELD_DEFINITION = "field_definition"
    FIELD_THEOREM = "field_theorem"
    FIELD_PROBLEM = "field_problem"
    BODYLIST_DEFINITION = "bodylist_definition"
    BODYLIST_THEOREM = "bodylist_theorem"
    BODYLIST_PROOF = "bodylist_proof"
    REFS_PROBLEM = "refs_problem"
    REFS_SOLUTION = "refs_solution"
    TACTICS_DEFINITION = "references_tactics_definition"
    TACTICS_THEOREM = "references_tactics_theorem"
    TACTICS_PROOF = "references_tactics_proof"
    TACTICS_PROBLEM = "references_tactics_problem"
    TACTICS_SOLUTION = "references_tactics_solution"
    FUSION_STEP4 = "fusion_step4"
    FUSION_STEP5 = "fusion_step5"
    COMPLETION_KNOWLEDGE_POINTS = "completion_knowledge_points"
    COMPLETION_CLASSIFY = "completion_classify"
    COMPLETION_ANSWER = "completion_answer"
    COMPLETION_CALIBRATE = "completion_calibrate"


def _title(kind: str) -> str:
    return (
        "Your task is to generate a title that can summarize the content "
        f"of the given math {kind}."
    )


def _field(kind: str) -> str:
    return (
        f"Your task is to identify the most relevant mathematical field for "
        f'the given math {kind} from the following choices: "algebra", '
        '"geometry", "analysis", "logic", "probability and statistics", '
        '"applied mathematics", "foundations of mathematics". '
        "Choose one from them."
    )


def _bodylist(kind: str) -> str:
    return (
        f"Your task is to label each element in the given content list of a "
        f"math {kind}, in order to determine the role of each element. "
        'The labels of mathematical roles are: "premise", "assumption", '
        '"lemma", "corollary", "definition", "conclusion", "deduction", '
        '"calculation", "enumeration". '
        "Choose only the most relative one from them when you label."
    )


def _refs(kind: str) -> str:
    return (
        f"Your task is to identify the mathematical definitions or theorems "
        f"referenced in the given math {kind}. When there is at least one "
        "reference, output each reference in the following format: "
        '"definition:" or "theorem:" along with the original reference. '
        "When there is no reference, output an empty list."
    )


def _tactics(kind: str) -> str:
    return (
        f"Your task is to label each reference shown in the given content "
        f"list of a math {kind}, in order to determine the roles of each "
        'reference. The labels of mathematical roles are: "premise", '
        '"assumption", "lemma", "corollary", "definition", "conclusion", '
        '"deduction", "calculation", "enumeration". '
        "Choose only the most relative one from them when you label."
    )


_TEXTS: dict[TemplateId, str] = {
    TemplateId.TITLE_DEFINITION: _title("definition"),
    TemplateId.TITLE_THEOREM: _title("theorem"),
    TemplateId.TITLE_PROBLEM: _title("problem"),
    TemplateId.FIELD_DEFINITION: _field("definition"),
    TemplateId.FIELD_THEOREM: _field("theorem"),
    TemplateId.FIELD_PROBLEM: _field("problem"),
    TemplateId.BODYLIST_DEFINITION: _bodylist("definition"),
    TemplateId.BODYLIST_THEOREM: _bodylist("theorem"),
    TemplateId.BODYLIST_PROOF: _bodylist("theorem proof"),
    TemplateId.REFS_PROBLEM: _refs("problem"),
    TemplateId.REFS_SOLUTION: _refs("problem solution"),
    TemplateId.TACTICS_DEFINITION: _tactics("definition"),
    TemplateId.TACTICS_THEOREM: _tactics("theorem"),
    TemplateId.TACTICS_PROOF: _tactics("theorem proof"),
    TemplateId.TACTICS_PROBLEM: _tactics("problem"),
    TemplateId.TACTICS_SOLUTION: _tactics("problem solution"),
    TemplateId.FUSION_STEP4: (
        "Your task is to decide if the first math theorem mean the same "
        "thing as the second theorem. If they have the same meaning, you "
        'should answer "yes". Otherwise, you answer "no".'
    ),
    TemplateId.FUSION_STEP5: (
        "Your task is to decide which of the candidate theorems mean the "
        "same thing as the new theorem. You should choose one candidate and "
        "output its id number as your answer."
    ),
    TemplateId.COMPLETION_KNOWLEDGE_POINTS: (
        "Your task is to list the mathematical definitions and theorems "
        "that are needed to solve the given math problem. Output each item "
        'on its own line in the following format: "definition:" or '
        '"theorem:" along with the name of the knowledge point. '
        "When there is none, output an empty list."
    ),
    TemplateId.COMPLETION_CLASSIFY: (
        "Your task is to classify the given math problem into one of the "
        'following categories: "application", "calculation", "proof". '
        "Choose one from them."
    ),
    TemplateId.COMPLETION_ANSWER: (
        "Your task is to solve the given math problem with a rigorous "
        "derivation. Use the provided knowledge points when they help. "
        "When an error summary of a previous attempt is provided, avoid "
        "repeating those errors."
    ),
    TemplateId.COMPLETION_CALIBRATE: (
        "Your task is to summarize the errors in the given candidate answer "
        "to the math problem, based on the violated checks. Output a short "
        "error summary that can guide a corrected attempt."
    ),
}

# context keys per template: (required, optional)
_CONTEXT_KEYS: dict[TemplateId, tuple[tuple[str, ...], tuple[str, ...]]] = {
    TemplateId.TITLE_DEFINITION: (("content",), ()),
    TemplateId.TITLE_THEOREM: (("content",), ()),
    TemplateId.TITLE_PROBLEM: (("content",), ()),
    TemplateId.FIELD_DEFINITION: (("content",), ()),
    TemplateId.FIELD_THEOREM: (("content",), ()),
    TemplateId.FIELD_PROBLEM: (("content",), ()),
    TemplateId.BODYLIST_DEFINITION: (("content",), ()),
    TemplateId.BODYLIST_THEOREM: (("content",), ()),
    TemplateId.BODYLIST_PROOF: (("content",), ()),
    TemplateId.REFS_PROBLEM: (("content",), ()),
    TemplateId.REFS_SOLUTION: (("content",), ()),
    TemplateId.TACTICS_DEFINITION: (("content", "refs"), ()),
    TemplateId.TACTICS_THEOREM: (("content", "refs"), ()),
    TemplateId.TACTICS_PROOF: (("content", "refs"), ()),
    TemplateId.TACTICS_PROBLEM: (("content", "refs"), ()),
    TemplateId.TACTICS_SOLUTION: (("content", "refs"), ()),
    TemplateId.FUSION_STEP4: (("first theorem", "second theorem"), ()),
    TemplateId.FUSION_STEP5: (("new theorem", "candidates"), ()),
    TemplateId.COMPLETION_KNOWLEDGE_POINTS: (("problem",), ()),
    TemplateId.COMPLETION_CLASSIFY: (("problem",), ()),
    TemplateId.COMPLETION_ANSWER: (("problem", "knowledge"), ("error summary",)),
    TemplateId.COMPLETION_CALIBRATE: (("problem", "answer", "violations"), ()),
}


@dataclass(frozen=True)
class Prompt:
    """A fully rendered prompt plus a stable digest for mock keying."""

    template: TemplateId
    rendered: str
    context_digest: str


def template_text(template: TemplateId) -> str:
    return _TEXTS[template]


def _render_value(key: str, value) -> str:
    if isinstance(value, str):
        return f"{key}: {value}"
    if isinstance(value, dict):
        if not value:
            return f"{key}: {{}}"
        items = "\n".join(f"- {k} -> {v}" for k, v in value.items())
        return f"{key}:\n{items}"
    if isinstance(value, (list, tuple)):
        if not value:
            return f"{key}: []"
        items = "\n".join(f"- {item}" for item in value)
        return f"{key}:\n{items}"
    return f"{key}: {value}"


def render_template(template: TemplateId, context: dict) -> Prompt:
    """Render template text plus the serialized context block.

    Raises :class:`MissingContextError` when a required key is absent;
    optional keys render only when provided.
    """
    required, optional = _CONTEXT_KEYS[template]
    blocks = [template_text(template)]
    for key in required:
        if key not in context:
            raise MissingContextError(key)
        blocks.append(_render_value(key, context[key]))
    for key in optional:
        if key in context:
            blocks.append(_render_value(key, context[key]))
    rendered = "\n\n".join(blocks)
    digest = hashlib.sha256(rendered.encode("utf-8")).hexdigest()[:16]
    return Prompt(template=template, rendered=rendered, context_digest=digest)
