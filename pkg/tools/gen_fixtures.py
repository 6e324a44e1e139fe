"""Regenerate the scripted-mock response fixtures for the test-suite.

Runs the full pipeline over the committed corpus fixtures once, against an
in-process responder that answers every prompt deterministically from the
prompt text alone, and records each (context digest -> response) pair into
``tests/fixtures/mock_responses.jsonl``. The tests replay the identical
pipeline through ``ScriptedMockBackend.from_file`` on that file.

Usage: python3 tools/gen_fixtures.py
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from automathkg.kg import MathField
from automathkg.llm import LlmBackend, LlmParams, Prompt, TemplateId

from pipeline_util import MOCK_RESPONSES, run_pipeline

# Context blocks a rendered prompt may carry, marked by a line-start header.
_HEADERS = (
    "content",
    "refs",
    "first theorem",
    "second theorem",
    "new theorem",
    "candidates",
    "problem",
    "knowledge",
    "error summary",
    "answer",
    "violations",
)

# The tactic labels the tactics/bodylist templates offer to the model.
_TACTIC_CHOICES = (
    "premise",
    "assumption",
    "lemma",
    "corollary",
    "calculation",
    "enumeration",
    "definition",
    "conclusion",
    "deduction",
)

# Keyword -> reference line, scanned in order against lowercased content.
_KEYWORD_REFS = (
    ("power set", "definition: power set"),
    ("union", "definition: union of sets"),
    ("subset", "definition: subset"),
    ("set", "definition: set"),
)

_FIELDS = sorted(MathField, key=lambda f: f.value)


def _sections(rendered: str) -> dict[str, str]:
    """Split a rendered prompt into its context blocks by header."""
    marks: list[tuple[int, str]] = []
    for header in _HEADERS:
        needle = header + ":"
        pos = 0
        while True:
            idx = rendered.find(needle, pos)
            if idx == -1:
                break
            if idx == 0 or rendered[idx - 1] == "\n":
                marks.append((idx, header))
            pos = idx + 1
    marks.sort()
    out: dict[str, str] = {}
    for rank, (idx, header) in enumerate(marks):
        end = marks[rank + 1][0] if rank + 1 < len(marks) else len(rendered)
        out.setdefault(header, rendered[idx + len(header) + 1 : end].strip())
    return out


def _items(section: str) -> list[str]:
    """Re-assemble the ``- item`` list of a block; bare text is one item."""
    items: list[str] = []
    for line in section.splitlines():
        if line.startswith("- "):
            items.append(line[2:])
        elif items:
            items[-1] += "\n" + line
        elif line.strip():
            items.append(line)
    return items


def _content_lines(section: str) -> list[str]:
    return [item for item in _items(section) if not item.startswith("title: ")]


def _sentences(text: str) -> list[str]:
    joined = " ".join(text.split())
    return [s.strip() for s in re.split(r"(?<=[.?!])\s+", joined) if s.strip()]


def _stable_index(text: str, modulus: int) -> int:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=2).digest()
    return int.from_bytes(digest, "big") % modulus


class DeterministicResponder(LlmBackend):
    """Answers every augmentation/fusion/completion prompt deterministically.

    Responses are functions of the rendered prompt text only, so replaying
    the same pipeline always re-derives the same knowledge graph.
    """

    def complete(self, prompt: Prompt, params: LlmParams | None = None) -> str:
        name = prompt.template.value
        sections = _sections(prompt.rendered)
        if prompt.template is TemplateId.FUSION_STEP4:
            same = _content_lines(sections.get("first theorem", "")) == _content_lines(
                sections.get("second theorem", "")
            )
            return "yes" if same else "no"
        if prompt.template is TemplateId.FUSION_STEP5:
            return self._best_candidate(sections.get("candidates", ""))
        if prompt.template is TemplateId.COMPLETION_CLASSIFY:
            return self._classify(sections.get("problem", ""))
        if prompt.template is TemplateId.COMPLETION_KNOWLEDGE_POINTS:
            return self._refs(sections.get("problem", ""))
        if prompt.template is TemplateId.COMPLETION_ANSWER:
            return self._answer(sections.get("problem", ""))
        if prompt.template is TemplateId.COMPLETION_CALIBRATE:
            issues = _items(sections.get("violations", ""))
            return "Earlier attempt issues: " + "; ".join(issues)
        if name.startswith("title_"):
            return self._title(name.split("_", 1)[1], sections.get("content", ""))
        if name.startswith("field_"):
            return _FIELDS[_stable_index(sections.get("content", ""), len(_FIELDS))].value
        if name.startswith("bodylist_"):
            return self._bodylist(sections.get("content", ""))
        if name.startswith("refs_"):
            return self._refs(sections.get("content", ""))
        if name.startswith("references_tactics_"):
            return self._tactics(sections.get("refs", ""))
        raise RuntimeError(f"no deterministic response for template {name}")

    @staticmethod
    def _title(kind: str, content: str) -> str:
        emphasized = re.search(r"\\emph\{([^}]+)\}", content)
        if emphasized:
            core = emphasized.group(1)
        else:
            words = re.findall(r"[A-Za-z]+", content)
            core = " ".join(words[:4]) or "untitled"
        return f"{kind.capitalize()}:{core.title()}"

    @staticmethod
    def _bodylist(content: str) -> str:
        sentences = _sentences(content) or ["Stated as given."]
        segments = [{"description": sentences[0][:120], "action": "premise"}]
        for middle in sentences[1:-1]:
            segments.append({"description": middle[:120], "action": "deduction"})
        if len(sentences) > 1:
            segments.append({"description": sentences[-1][:120], "action": "conclusion"})
        return json.dumps(segments)

    @staticmethod
    def _refs(content: str) -> str:
        lowered = content.lower()
        lines = [line for keyword, line in _KEYWORD_REFS if keyword in lowered]
        return "\n".join(lines)

    @staticmethod
    def _tactics(refs_section: str) -> str:
        refs = _items(refs_section)
        mapping = {
            ref: _TACTIC_CHOICES[_stable_index(ref, len(_TACTIC_CHOICES))]
            for ref in refs
        }
        return json.dumps(mapping)

    @staticmethod
    def _best_candidate(candidates_section: str) -> str:
        for item in _items(candidates_section):
            match = re.match(r"id (\d+):", item)
            if match:
                return match.group(1)
        return "0"

    @staticmethod
    def _classify(problem: str) -> str:
        lowered = problem.lower()
        if any(w in lowered for w in ("compute", "calculate", "how many")):
            return "calculation"
        if any(w in lowered for w in ("show", "prove")):
            return "proof"
        return "application"

    @staticmethod
    def _answer(problem: str) -> str:
        sentences = _sentences(problem)
        asked = sentences[-1] if sentences else "the stated question"
        return (
            "Using the retrieved knowledge we argue directly. "
            f"{asked} The required count is 4, which completes the proof. QED."
        )


class RecordingBackend(LlmBackend):
    """Wraps a backend and records every (context digest -> response) pair."""

    def __init__(self, inner: LlmBackend) -> None:
        self.inner = inner
        self.responses: dict[str, str] = {}

    def complete(self, prompt: Prompt, params: LlmParams | None = None) -> str:
        response = self.inner.complete(prompt, params)
        previous = self.responses.get(prompt.context_digest)
        if previous is not None and previous != response:
            raise RuntimeError(
                f"conflicting responses for digest {prompt.context_digest}"
            )
        self.responses[prompt.context_digest] = response
        return response


def main() -> None:
    recorder = RecordingBackend(DeterministicResponder())
    kg, vd = run_pipeline(recorder)
    lines = [
        json.dumps({"match": digest, "response": response}, ensure_ascii=False)
        for digest, response in recorder.responses.items()
    ]
    MOCK_RESPONSES.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} fixtures to {MOCK_RESPONSES}")
    print(f"pipeline graph: {len(kg.entities)} entities, {kg.edge_count} edges, "
          f"{len(vd)} vectors")


if __name__ == "__main__":
    main()
