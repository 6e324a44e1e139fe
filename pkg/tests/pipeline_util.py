"""Shared pipeline runner for the scripted-fixture tests.

``run_pipeline`` executes the whole toolchain — extract, augment, index,
fuse, complete — over the committed corpus fixtures. The fixture generator
(``tools/gen_fixtures.py``) records a backend's responses while running it;
the tests replay the same pipeline from the recorded fixture file and check
that the results are byte-stable.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from automathkg.completion import complete_entity, find_incomplete, write_back
from automathkg.embedding import STRATEGY_1, HashEmbedder
from automathkg.fusion import fuse
from automathkg.ingest import extract_from_latex, to_input_kg
from automathkg.kg import KnowledgeGraph, save_kg
from automathkg.llm import LlmBackend
from automathkg.vectordb import VectorDb, build_vd, save_vd

FIXTURES = Path(__file__).resolve().parent / "fixtures"
MINI_CORPUS = FIXTURES / "mini_corpus.tex"
FUSE_INCREMENT = FIXTURES / "fuse_increment.tex"
MOCK_RESPONSES = FIXTURES / "mock_responses.jsonl"


def load_corpus_kg(path: Path = MINI_CORPUS) -> KnowledgeGraph:
    """Extract the committed corpus into a fresh input graph."""
    raws = extract_from_latex(
        path.read_text(encoding="utf-8"), source_tag=path.name
    )
    return to_input_kg(raws)


def run_pipeline(backend: LlmBackend) -> tuple[KnowledgeGraph, VectorDb]:
    """Extract, augment, index, fuse the increment, complete what is open."""
    from automathkg.llm import augment_graph

    embedder = HashEmbedder()
    kg = load_corpus_kg(MINI_CORPUS)
    augment_graph(kg, backend)
    vd, _failed = build_vd(kg, embedder, STRATEGY_1)

    incoming = load_corpus_kg(FUSE_INCREMENT)
    augment_graph(incoming, backend)
    fuse(kg, incoming, vd, embedder, backend)

    for entity in find_incomplete(kg):
        result, bundle = complete_entity(
            kg, entity.id, backend, vd=vd, embedder=embedder
        )
        if result.status == "complete":
            write_back(kg, entity.id, result, bundle)
    kg.rebuild_edges()
    return kg, vd


def kg_bytes(kg: KnowledgeGraph) -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "kg.jsonl"
        save_kg(kg, path)
        return path.read_bytes()


def vd_bytes(vd: VectorDb) -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "kg.vd"
        save_vd(vd, path)
        return path.read_bytes()
