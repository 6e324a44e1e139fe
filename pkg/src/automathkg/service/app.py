"""The retrieval service: a FastAPI app over a loaded graph and index."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..completion import KnowledgePoint, complete_entity, two_stage_retrieve, write_back
from ..config import ToolkitConfig, make_backend, make_embedder
from ..embedding import Embedder
from ..errors import (
    BackendError,
    BackendUnavailableError,
    DataError,
    EmptyIndexError,
    UnknownEntityError,
)
from ..fusion import FusionConfig, fuse
from ..kg import KnowledgeGraph, load_kg, normalize_title, save_kg
from ..kg.store import entity_from_dict, entity_json_line
from ..llm import LlmBackend
from ..vectordb import VectorDb, load_vd, save_vd
from .schemas import (
    CompleteRequest,
    RetrieveRequest,
    SearchHitModel,
    SearchRequest,
    SearchResponse,
)

logger = logging.getLogger(__name__)

__all__ = ["AppState", "build_state", "create_app", "serve"]


@dataclass
class AppState:
    """Everything one running service instance operates on."""

    kg: KnowledgeGraph
    vd: VectorDb
    embedder: Embedder
    backend: LlmBackend | None = None
    config: ToolkitConfig = None  # type: ignore[assignment]
    kg_path: str | None = None
    vd_path: str | None = None
    allow_mutations: bool = False

    def __post_init__(self) -> None:
        if self.config is None:
            self.config = ToolkitConfig()


def build_state(
    config: ToolkitConfig,
    kg_path: str | None = None,
    vd_path: str | None = None,
    allow_mutations: bool = False,
) -> AppState:
    """Load the graph, index, and backends a service instance needs."""
    kg_file = kg_path or config.kg_path
    vd_file = vd_path or config.vd_path
    kg = load_kg(kg_file)
    vd = load_vd(vd_file)
    try:
        backend = make_backend(config)
    except BackendUnavailableError:
        backend = None
    return AppState(
        kg=kg,
        vd=vd,
        embedder=make_embedder(config),
        backend=backend,
        config=config,
        kg_path=str(kg_file),
        vd_path=str(vd_file),
        allow_mutations=allow_mutations,
    )


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message})


def _entity_response(state: AppState, entity_id: int) -> Response:
    entity = state.kg.entity(entity_id)  # raises UnknownEntityError
    return Response(
        content=entity_json_line(entity).encode("utf-8"),
        media_type="application/json",
    )


def _points_from_texts(texts: list[str]) -> list[KnowledgePoint]:
    points = []
    for text in texts:
        lowered = text.strip().lower()
        if lowered.startswith("definition:"):
            points.append(KnowledgePoint(normalize_title(text), "definition"))
        elif lowered.startswith("theorem:"):
            points.append(KnowledgePoint(normalize_title(text), "theorem"))
        else:
            points.append(KnowledgePoint(text.strip(), None))
    return points


def create_app(state: AppState) -> FastAPI:
    """Wire the endpoints around one loaded state."""
    app = FastAPI(title="automathkg", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc))

    @app.exception_handler(UnknownEntityError)
    async def _on_unknown(request: Request, exc: UnknownEntityError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(BackendError)
    async def _on_backend(request: Request, exc: BackendError):
        return _error(503, "backend_unavailable", str(exc))

    @app.exception_handler(DataError)
    async def _on_data(request: Request, exc: DataError):
        return _error(400, "data_error", str(exc))

    @app.get("/entities/{entity_id}")
    def get_entity(entity_id: int) -> Response:
        return _entity_response(state, entity_id)

    @app.get("/entities")
    def get_entity_by_title(title: str) -> Response:
        entity_id = state.kg.exact_lookup(normalize_title(title))
        if entity_id is None:
            raise UnknownEntityError(f"no entity titled {title!r}")
        return _entity_response(state, entity_id)

    @app.post("/search")
    def search(body: SearchRequest) -> SearchResponse:
        if body.strategy is not None and body.strategy != state.vd.strategy_tag:
            raise DataError(
                f"index was built with {state.vd.strategy_tag!r}, "
                f"not {body.strategy!r}"
            )
        exclude: set[int] = set()
        if body.entity_id is not None:
            if body.entity_id not in state.vd:
                raise UnknownEntityError(
                    f"entity {body.entity_id} has no vector in the index"
                )
            query = state.vd.vector(body.entity_id)
            exclude.add(body.entity_id)
        else:
            query = state.embedder.embed_text(body.text)
        try:
            hits = state.vd.top_k(query, body.k, exclude=exclude)
        except EmptyIndexError as exc:
            raise DataError(str(exc)) from exc
        return SearchResponse(
            hits=[SearchHitModel(entity_id=h.entity_id, score=h.score) for h in hits]
        )

    @app.post("/retrieve")
    def retrieve(body: RetrieveRequest) -> dict:
        bundle = two_stage_retrieve(
            state.kg,
            state.vd,
            state.embedder,
            _points_from_texts(body.knowledge_points),
            seed_id=-1,
            fuzzy_k=body.fuzzy_k,
        )
        return bundle.to_dict()

    @app.get("/stats")
    def stats() -> dict:
        return state.kg.stats().to_dict()

    if state.allow_mutations:

        @app.post("/fuse")
        def fuse_endpoint(body: dict) -> dict:
            if state.backend is None:
                raise BackendUnavailableError("no language model configured")
            raw_entities = body.get("entities")
            if not isinstance(raw_entities, list) or not raw_entities:
                raise DataError("body must carry a nonempty 'entities' list")
            try:
                incoming = [entity_from_dict(raw) for raw in raw_entities]
            except ValueError as exc:
                raise DataError(f"bad entity payload: {exc}") from exc
            report = fuse(
                state.kg,
                incoming,
                state.vd,
                state.embedder,
                state.backend,
                FusionConfig(n_candidates=state.config.fusion_n),
            )
            _persist(state)
            return report.to_dict()

        @app.post("/complete")
        def complete_endpoint(body: CompleteRequest) -> dict:
            if state.backend is None:
                raise BackendUnavailableError("no language model configured")
            result, bundle = complete_entity(
                state.kg,
                body.entity_id,
                state.backend,
                vd=state.vd,
                embedder=state.embedder,
                max_rounds=body.max_rounds,
                fuzzy_k=state.config.fuzzy_k,
            )
            if result.status == "complete":
                write_back(state.kg, body.entity_id, result, bundle)
                _persist(state)
            return {"result": result.to_dict(), "bundle": bundle.to_dict()}

    return app


def _persist(state: AppState) -> None:
    if state.kg_path:
        save_kg(state.kg, state.kg_path)
    if state.vd_path:
        save_vd(state.vd, state.vd_path)


def serve(
    config: ToolkitConfig,
    kg_path: str | None = None,
    vd_path: str | None = None,
    host: str = "127.0.0.1",
    port: int = 8080,
    allow_mutations: bool = False,
) -> None:
    """Run the service until interrupted."""
    import uvicorn

    state = build_state(config, kg_path, vd_path, allow_mutations)
    app = create_app(state)
    logger.info(
        "serving %s + %s on %s:%d (mutations %s)",
        Path(state.kg_path).name,
        Path(state.vd_path).name,
        host,
        port,
        "enabled" if allow_mutations else "disabled",
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")
