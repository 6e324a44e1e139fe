"""LLM backend contract plus the scripted mock and HTTP implementations."""

from __future__ import annotations

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import requests

from ..errors import BackendUnavailableError, MalformedRecordError
from .templates import Prompt

logger = logging.getLogger(__name__)

__all__ = [
    "LlmParams",
    "LlmBackend",
    "MockFixture",
    "ScriptedMockBackend",
    "HttpLlmBackend",
]


@dataclass(frozen=True)
class LlmParams:
    max_tokens: int = 512
    temperature: float = 0.0
    seed: int = 0


class LlmBackend(ABC):
    """Anything that can answer a rendered prompt with text."""

    @abstractmethod
    def complete(self, prompt: Prompt, params: LlmParams | None = None) -> str:
        """Return the raw completion text for ``prompt``."""


@dataclass(frozen=True)
class MockFixture:
    """One scripted response: ``match`` is a context digest or a substring."""

    match: str
    response: str


class ScriptedMockBackend(LlmBackend):
    """Deterministic mock: first fixture whose matcher hits wins.

    A matcher hits when it equals the prompt's context digest or occurs as a
    substring of the rendered text. Prompts nothing matches get
    ``default_response``. Every call is recorded on ``call_log``.
    """

    def __init__(
        self,
        fixtures: list[MockFixture] | list[tuple[str, str]] | None = None,
        default_response: str = "",
    ) -> None:
        self.fixtures = [
            f if isinstance(f, MockFixture) else MockFixture(*f)
            for f in (fixtures or [])
        ]
        self.default_response = default_response
        self.call_log: list[Prompt] = []

    @classmethod
    def from_file(
        cls, path: str | Path, default_response: str = ""
    ) -> "ScriptedMockBackend":
        """Load ordered fixtures from a JSON Lines file of match/response objects."""
        fixtures = []
        for line_no, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_no, f"invalid JSON: {exc}") from None
            if not isinstance(obj, dict) or set(obj) != {"match", "response"}:
                raise MalformedRecordError(
                    line_no, "fixture lines need exactly match and response keys"
                )
            if not isinstance(obj["match"], str) or not isinstance(obj["response"], str):
                raise MalformedRecordError(line_no, "match and response must be strings")
            fixtures.append(MockFixture(obj["match"], obj["response"]))
        return cls(fixtures, default_response=default_response)

    def complete(self, prompt: Prompt, params: LlmParams | None = None) -> str:
        self.call_log.append(prompt)
        for fixture in self.fixtures:
            if fixture.match == prompt.context_digest or fixture.match in prompt.rendered:
                return fixture.response
        return self.default_response


class HttpLlmBackend(LlmBackend):
    """Client for the remote completion endpoint (POST /v1/complete)."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, prompt: Prompt, params: LlmParams | None = None) -> str:
        params = params or LlmParams()
        payload = {
            "prompt": prompt.rendered,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "seed": params.seed,
        }
        try:
            response = self.session.post(
                f"{self.base_url}/v1/complete", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"LLM backend unreachable: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailableError(
                f"LLM backend returned HTTP {response.status_code}"
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise BackendUnavailableError("LLM backend sent non-JSON body") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise BackendUnavailableError('LLM backend response lacks a "text" field')
        return body["text"]
