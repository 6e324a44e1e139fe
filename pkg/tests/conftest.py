"""Shared fixtures: corpus graphs, the scripted pipeline, fixture paths."""

from __future__ import annotations

import json

import pytest

from automathkg.llm import ScriptedMockBackend

from pipeline_util import FIXTURES, MOCK_RESPONSES, load_corpus_kg, run_pipeline


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads(
        (FIXTURES / "mini_corpus_manifest.json").read_text(encoding="utf-8")
    )


@pytest.fixture()
def mini_kg():
    """A fresh input graph extracted from the committed mini corpus."""
    return load_corpus_kg()


@pytest.fixture()
def scripted_backend() -> ScriptedMockBackend:
    return ScriptedMockBackend.from_file(MOCK_RESPONSES)


@pytest.fixture(scope="session")
def pipeline_state():
    """(kg, vd) after one full scripted pipeline run. Treat as read-only."""
    return run_pipeline(ScriptedMockBackend.from_file(MOCK_RESPONSES))
