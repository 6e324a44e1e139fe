"""The retrieval service: endpoint behavior and parity with the library."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from automathkg.config import ENV_EMBED_URL, ENV_LLM_URL, ToolkitConfig
from automathkg.embedding import HashEmbedder
from automathkg.kg import load_kg
from automathkg.kg.store import entity_to_dict
from automathkg.llm import ScriptedMockBackend, augment_graph
from automathkg.service import build_state, create_app
from automathkg.vectordb import build_vd, load_vd

from pipeline_util import (
    FUSE_INCREMENT,
    MOCK_RESPONSES,
    kg_bytes,
    load_corpus_kg,
    vd_bytes,
)


@pytest.fixture(scope="module")
def service_files(tmp_path_factory, pipeline_state):
    """The pipeline's graph and index, saved where a service can load them."""
    kg, vd = pipeline_state
    tmp = tmp_path_factory.mktemp("service")
    kg_path = tmp / "kg.jsonl"
    vd_path = tmp / "kg.vd"
    kg_path.write_bytes(kg_bytes(kg))
    vd_path.write_bytes(vd_bytes(vd))
    return kg_path, vd_path


@pytest.fixture(scope="module")
def client(service_files):
    """A read-only service over the pipeline artifacts."""
    mp = pytest.MonkeyPatch()
    mp.delenv(ENV_LLM_URL, raising=False)
    mp.delenv(ENV_EMBED_URL, raising=False)
    kg_path, vd_path = service_files
    config = ToolkitConfig(fixtures_path=str(MOCK_RESPONSES))
    state = build_state(config, str(kg_path), str(vd_path))
    yield TestClient(create_app(state))
    mp.undo()


@pytest.fixture()
def mutable_world(tmp_path, monkeypatch):
    """A fresh pre-completion world plus a mutation-enabled client."""
    monkeypatch.delenv(ENV_LLM_URL, raising=False)
    monkeypatch.delenv(ENV_EMBED_URL, raising=False)
    backend = ScriptedMockBackend.from_file(MOCK_RESPONSES)
    kg = load_corpus_kg()
    augment_graph(kg, backend)
    vd, _ = build_vd(kg, HashEmbedder())
    kg_path = tmp_path / "kg.jsonl"
    vd_path = tmp_path / "kg.vd"
    kg_path.write_bytes(kg_bytes(kg))
    vd_path.write_bytes(vd_bytes(vd))
    config = ToolkitConfig(fixtures_path=str(MOCK_RESPONSES))
    state = build_state(config, str(kg_path), str(vd_path), allow_mutations=True)
    return TestClient(create_app(state)), kg_path, vd_path


# -- entities ------------------------------------------------------------------


def test_get_entity_is_byte_compatible_with_the_store(client, service_files):
    kg_path, _ = service_files
    lines = kg_path.read_bytes().split(b"\n")
    for line in lines[1:]:
        if line and json.loads(line)["id"] == 5:
            expected = line
            break
    response = client.get("/entities/5")
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/json")
    assert response.content == expected


def test_get_unknown_entity_is_a_404(client):
    response = client.get("/entities/999")
    assert response.status_code == 404
    body = response.json()
    assert body["error"] == "not_found" and "999" in body["message"]


def test_get_entity_by_title_normalizes_and_resolves_aliases(client, service_files):
    kg = load_kg(service_files[0])
    title = kg.entity(0).title
    response = client.get("/entities", params={"title": f"  {title.upper()}  "})
    assert response.status_code == 200
    assert json.loads(response.content)["id"] == 0
    # the fused duplicate's title survives as an alias of entity 0
    response = client.get("/entities", params={"title": "Definition:Collection"})
    assert response.status_code == 200
    assert json.loads(response.content)["id"] == 0


def test_get_entity_by_unknown_title_is_a_404(client):
    response = client.get("/entities", params={"title": "Definition:Nowhere"})
    assert response.status_code == 404
    assert response.json()["error"] == "not_found"


def test_get_entity_without_title_param_is_a_400(client):
    response = client.get("/entities")
    assert response.status_code == 400
    assert response.json()["error"] == "bad_request"


# -- search --------------------------------------------------------------------


def test_search_by_entity_matches_the_library_exactly(client, service_files):
    vd = load_vd(service_files[1])
    expected = vd.top_k(vd.vector(0), 5, exclude={0})
    response = client.post("/search", json={"entity_id": 0, "k": 5})
    assert response.status_code == 200
    hits = response.json()["hits"]
    assert [h["entity_id"] for h in hits] == [h.entity_id for h in expected]
    assert [h["score"] for h in hits] == [h.score for h in expected]


def test_search_by_text_matches_the_library_exactly(client, service_files):
    vd = load_vd(service_files[1])
    query = HashEmbedder().embed_text("the union of two sets")
    expected = vd.top_k(query, 3)
    response = client.post("/search", json={"text": "the union of two sets", "k": 3})
    assert response.status_code == 200
    hits = response.json()["hits"]
    assert [(h["entity_id"], h["score"]) for h in hits] == [
        (h.entity_id, h.score) for h in expected
    ]


def test_search_requires_exactly_one_query(client):
    both = client.post("/search", json={"text": "x", "entity_id": 0})
    neither = client.post("/search", json={})
    assert both.status_code == neither.status_code == 400
    assert both.json()["error"] == "bad_request"
    assert "exactly one" in both.json()["message"]


def test_search_rejects_bad_k_and_unknown_entities(client):
    assert client.post("/search", json={"text": "x", "k": 0}).status_code == 400
    missing = client.post("/search", json={"entity_id": 999})
    assert missing.status_code == 404
    assert missing.json()["error"] == "not_found"


def test_search_rejects_a_strategy_mismatch(client):
    response = client.post(
        "/search", json={"entity_id": 0, "strategy": "strategy2"}
    )
    assert response.status_code == 400
    body = response.json()
    assert body["error"] == "data_error"
    assert "strategy1" in body["message"] and "strategy2" in body["message"]


def test_search_accepts_the_matching_strategy(client):
    response = client.post(
        "/search", json={"entity_id": 0, "strategy": "strategy1"}
    )
    assert response.status_code == 200


# -- retrieve and stats ----------------------------------------------------------


def test_retrieve_runs_both_stages(client, service_files):
    kg = load_kg(service_files[0])
    seed_title = kg.entity(0).title
    response = client.post(
        "/retrieve",
        json={"knowledge_points": [f"  {seed_title}  ", "unrelated free text"],
              "fuzzy_k": 2},
    )
    assert response.status_code == 200
    bundle = response.json()
    assert set(bundle) == {
        "points", "exact_ids", "fuzzy_hits", "selected_ids", "selected_titles",
    }
    assert bundle["points"][0]["kind_hint"] == "definition"
    assert bundle["points"][1]["kind_hint"] is None
    assert 0 in bundle["exact_ids"]
    assert bundle["selected_ids"][0] == 0
    assert len(bundle["selected_titles"]) == len(bundle["selected_ids"])


def test_stats_endpoint_mirrors_the_graph(client, service_files):
    kg = load_kg(service_files[0])
    response = client.get("/stats")
    assert response.status_code == 200
    assert response.json() == kg.stats().to_dict()


# -- mutations -----------------------------------------------------------------


def test_mutation_routes_are_absent_by_default(client):
    assert client.post("/fuse", json={"entities": []}).status_code == 404
    assert client.post("/complete", json={"entity_id": 5}).status_code == 404


def test_complete_endpoint_writes_back_and_persists(mutable_world):
    client, kg_path, _ = mutable_world
    response = client.post("/complete", json={"entity_id": 5})
    assert response.status_code == 200
    payload = response.json()
    assert payload["result"]["entity_id"] == 5
    assert payload["result"]["status"] == "complete"
    assert payload["bundle"]["selected_titles"]
    reloaded = load_kg(kg_path)
    assert len(reloaded.entity(5).proofs) == 1
    assert reloaded.entity(5).source == "completion"


def test_complete_endpoint_rejects_complete_entities(mutable_world):
    client, _, _ = mutable_world
    response = client.post("/complete", json={"entity_id": 0})
    assert response.status_code == 400
    assert response.json()["error"] == "data_error"


def test_fuse_endpoint_accepts_wire_entities_and_persists(mutable_world):
    client, kg_path, vd_path = mutable_world
    backend = ScriptedMockBackend.from_file(MOCK_RESPONSES)
    incoming = load_corpus_kg(FUSE_INCREMENT)
    augment_graph(incoming, backend)
    body = {"entities": [entity_to_dict(e) for e in incoming.iter_entities()]}
    before = len(load_kg(kg_path))
    response = client.post("/fuse", json=body)
    assert response.status_code == 200
    report = response.json()
    assert report["added"] + report["merged"] + report["skipped"] == len(
        body["entities"]
    )
    assert report["added"] == 1
    reloaded = load_kg(kg_path)
    assert len(reloaded) == before + report["added"]
    assert len(load_vd(vd_path)) == len(reloaded)


def test_fuse_endpoint_validates_the_body(mutable_world):
    client, _, _ = mutable_world
    empty = client.post("/fuse", json={"entities": []})
    assert empty.status_code == 400
    assert empty.json()["error"] == "data_error"
    assert client.post("/fuse", json={"entities": "x"}).status_code == 400
    malformed = client.post("/fuse", json={"entities": [{"id": 1}]})
    assert malformed.status_code == 400


def test_mutation_endpoints_need_a_backend(service_files, tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_LLM_URL, raising=False)
    monkeypatch.delenv(ENV_EMBED_URL, raising=False)
    kg_path, vd_path = service_files
    state = build_state(
        ToolkitConfig(), str(kg_path), str(vd_path), allow_mutations=True
    )
    assert state.backend is None
    client = TestClient(create_app(state))
    response = client.post("/complete", json={"entity_id": 5})
    assert response.status_code == 503
    assert response.json()["error"] == "backend_unavailable"


def test_build_state_falls_back_to_config_paths(service_files, monkeypatch):
    monkeypatch.delenv(ENV_LLM_URL, raising=False)
    monkeypatch.delenv(ENV_EMBED_URL, raising=False)
    kg_path, vd_path = service_files
    config = ToolkitConfig(kg_path=str(kg_path), vd_path=str(vd_path))
    state = build_state(config)
    assert len(state.kg) == 13 and len(state.vd) == 13
    assert state.allow_mutations is False
