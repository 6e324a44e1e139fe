"""Toolkit configuration: JSON file, environment overrides, factories."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .embedding import (
    STRATEGY_1,
    STRATEGY_2,
    Embedder,
    HashEmbedder,
    HttpEmbedder,
    SentenceMask,
    validate_weights,
)
from .errors import BackendUnavailableError, DataError
from .llm import HttpLlmBackend, LlmBackend, ScriptedMockBackend

ENV_LLM_URL = "AMKG_LLM_URL"
ENV_EMBED_URL = "AMKG_EMBED_URL"

__all__ = [
    "ENV_EMBED_URL",
    "ENV_LLM_URL",
    "ToolkitConfig",
    "load_config",
    "make_backend",
    "make_embedder",
]


@dataclass
class ToolkitConfig:
    """Everything the CLI and service need that is not a positional path."""

    kg_path: str = "kg.jsonl"
    vd_path: str = "kg.vd"
    fixtures_path: str | None = None
    llm_url: str | None = None
    embed_url: str | None = None
    llm_timeout: float = 30.0
    embed_timeout: float = 30.0
    strategy: str = STRATEGY_1
    weights: tuple[float, ...] | None = None
    mask: tuple[str, ...] | None = None
    fusion_n: int = 5
    max_rounds: int = 3
    fuzzy_k: int = 3
    retries: int = 3
    parallelism: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in (STRATEGY_1, STRATEGY_2):
            raise DataError(f"config: unknown strategy {self.strategy!r}")
        if self.weights is not None:
            if self.strategy != STRATEGY_2:
                raise DataError("config: weights are only valid with strategy2")
            try:
                self.weights = validate_weights(self.weights)
            except ValueError as exc:
                raise DataError(f"config: {exc}") from exc
        for name in ("llm_timeout", "embed_timeout"):
            if getattr(self, name) <= 0:
                raise DataError(f"config: {name} must be positive")
        for name in ("fusion_n", "max_rounds", "fuzzy_k", "retries", "parallelism"):
            if getattr(self, name) < 1:
                raise DataError(f"config: {name} must be positive")
        if self.mask is not None:
            self.mask = tuple(self.mask)
            try:
                SentenceMask.of(*self.mask)
            except ValueError as exc:
                raise DataError(f"config: {exc}") from exc

    def sentence_mask(self) -> SentenceMask:
        return SentenceMask.of(*self.mask) if self.mask else SentenceMask.full()


def load_config(path: str | Path | None = None) -> ToolkitConfig:
    """Build a config from an optional JSON file plus environment overrides."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"config: cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"config: {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise DataError(f"config: {path} must hold a JSON object")
        known = {f.name for f in fields(ToolkitConfig)}
        unknown = set(data) - known
        if unknown:
            raise DataError(f"config: unknown keys {sorted(unknown)}")
    try:
        config = ToolkitConfig(**data)
    except TypeError as exc:
        raise DataError(f"config: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"config: {exc}") from exc
    if os.environ.get(ENV_LLM_URL):
        config.llm_url = os.environ[ENV_LLM_URL]
    if os.environ.get(ENV_EMBED_URL):
        config.embed_url = os.environ[ENV_EMBED_URL]
    return config


def make_backend(config: ToolkitConfig) -> LlmBackend:
    """The configured language-model backend (fixtures beat live URLs)."""
    if config.fixtures_path:
        return ScriptedMockBackend.from_file(config.fixtures_path)
    if config.llm_url:
        return HttpLlmBackend(config.llm_url, timeout=config.llm_timeout)
    raise BackendUnavailableError(
        f"no language model configured (set {ENV_LLM_URL}, llm_url, or fixtures_path)"
    )


def make_embedder(config: ToolkitConfig) -> Embedder:
    """The configured embedder; offline hashing when no endpoint is set."""
    if config.embed_url:
        return HttpEmbedder(config.embed_url, timeout=config.embed_timeout)
    return HashEmbedder()
