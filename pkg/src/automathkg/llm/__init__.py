"""Language-model gateway: prompt templates, backends, and parsers."""

from .backends import (
    HttpLlmBackend,
    LlmBackend,
    LlmParams,
    MockFixture,
    ScriptedMockBackend,
)
from .ops import (
    ask_with_retries,
    augment_entity,
    augment_graph,
    entity_block,
    judge_best_candidate,
    judge_consistency,
    parse_bodylist_response,
    parse_candidate_id,
    parse_field_response,
    parse_refs_response,
    parse_tactics_response,
    parse_title_response,
    parse_yes_no,
)
from .templates import Prompt, TemplateId, render_template, template_text

__all__ = [
    "HttpLlmBackend",
    "LlmBackend",
    "LlmParams",
    "MockFixture",
    "Prompt",
    "ScriptedMockBackend",
    "TemplateId",
    "ask_with_retries",
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
    "render_template",
    "template_text",
]
