"""Request and response models of the retrieval service."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class SearchRequest(BaseModel):
    """Search by free text or by an already-indexed entity's vector."""

    text: str | None = None
    entity_id: int | None = None
    k: int = Field(default=5, ge=1)
    strategy: str | None = None

    @model_validator(mode="after")
    def _exactly_one_query(self) -> "SearchRequest":
        if (self.text is None) == (self.entity_id is None):
            raise ValueError("provide exactly one of 'text' and 'entity_id'")
        return self


class SearchHitModel(BaseModel):
    entity_id: int
    score: float


class SearchResponse(BaseModel):
    hits: list[SearchHitModel]


class RetrieveRequest(BaseModel):
    knowledge_points: list[str]
    fuzzy_k: int = Field(default=3, ge=1)


class FuzzyHitModel(BaseModel):
    entity_id: int
    score: float


class KnowledgePointModel(BaseModel):
    text: str
    kind_hint: str | None = None


class RetrieveResponse(BaseModel):
    points: list[KnowledgePointModel]
    exact_ids: list[int]
    fuzzy_hits: list[FuzzyHitModel]
    selected_ids: list[int]
    selected_titles: list[str]


class CompleteRequest(BaseModel):
    entity_id: int
    max_rounds: int = Field(default=3, ge=1)


class ErrorBody(BaseModel):
    error: str
    message: str
