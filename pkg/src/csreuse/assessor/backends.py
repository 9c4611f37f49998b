"""Assessor backends: reference oracle, offline mock and a chat-completion client."""

from __future__ import annotations

import os
import re
from typing import Mapping, Protocol

from ..collection import MAX_GRADE, Pair
from ..errors import AssessorError, BackendUnavailable
from .prompts import AssessmentRequest

_TOKEN = re.compile(r"[a-z0-9]+")


class Backend(Protocol):
    backend_id: str
    cacheable: bool

    def complete(self, prompt: str, req: AssessmentRequest) -> str: ...


class OracleBackend:
    """Answers with the reference grade of the pair; the prompt is ignored.

    Not cacheable: two pairs can share a prompt yet carry different grades.
    """

    cacheable = False

    def __init__(self, reference: Mapping[Pair, int], backend_id: str = "oracle"):
        self.reference = reference
        self.backend_id = backend_id

    def complete(self, prompt: str, req: AssessmentRequest) -> str:
        try:
            return str(self.reference[(req.query_id, req.doc_id)])
        except KeyError:
            raise AssessorError(f"oracle has no grade for ({req.query_id}, {req.doc_id})") from None


def tokenize(text: str) -> set[str]:
    return set(_TOKEN.findall(text.lower()))


def mock_grade(resolved_utterance: str, passage: str) -> int:
    """floor(5 * token recall of the utterance in the passage), capped at 4."""
    query = tokenize(resolved_utterance)
    if not query:
        return 0
    shared = len(query & tokenize(passage))
    return min(MAX_GRADE, (5 * shared) // len(query))


class MockBackend:
    """Deterministic offline assessor driven by lexical overlap."""

    cacheable = True

    def __init__(self, backend_id: str = "mock"):
        self.backend_id = backend_id

    def complete(self, prompt: str, req: AssessmentRequest) -> str:
        return f"Relevance: {mock_grade(req.resolved_utterance, req.passage)}"


class RemoteBackend:
    """Minimal OpenAI-style chat-completion client.

    The API key is read from the environment variable named by ``api_key_env``
    at call time so it never ends up in configs or manifests.
    """

    cacheable = True

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        top_p: float = 1.0,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 60.0,
        backend_id: str | None = None,
        client=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.top_p = top_p
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.backend_id = backend_id or f"remote:{model}"
        self._client = client

    def _http(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def payload(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "top_p": self.top_p,
        }

    def complete(self, prompt: str, req: AssessmentRequest) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._http().post(self.endpoint, json=self.payload(prompt), headers=headers)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"{self.endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"{self.endpoint} returned HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"unexpected response body from {self.endpoint}") from exc
