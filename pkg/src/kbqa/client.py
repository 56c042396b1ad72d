"""Bounded-concurrency HTTP client for the model server.

All remote calls in the pipeline (generation, embedding, span scoring) go
through this one client so in-flight limits, timeouts, and protocol
validation live in a single place.
"""

from __future__ import annotations

import threading
from typing import Sequence

import requests

from .errors import (
    ProtocolError,
    RemoteUnavailableError,
    ScoreCountMismatchError,
)


class ModelServerClient:
    def __init__(
        self,
        endpoint: str,
        timeout: float = 60.0,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._gate = threading.Semaphore(max_in_flight)
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict, retries: int = 0) -> dict:
        url = f"{self.endpoint}{path}"
        last_error: Exception | None = None
        for _ in range(retries + 1):
            try:
                with self._gate:
                    response = self._session.post(url, json=payload, timeout=self.timeout)
                break
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
        else:
            raise RemoteUnavailableError(f"{url}: {last_error}")
        if response.status_code == 503:
            raise RemoteUnavailableError(f"{url}: server still loading (503)")
        if response.status_code != 200:
            raise ProtocolError(f"{url}: HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"{url}: invalid JSON body: {exc}") from exc

    def health(self) -> dict:
        url = f"{self.endpoint}/health"
        try:
            response = self._session.get(url, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise RemoteUnavailableError(f"{url}: {exc}") from exc
        if response.status_code == 503:
            raise RemoteUnavailableError(f"{url}: models still loading (503)")
        if response.status_code != 200:
            raise ProtocolError(f"{url}: HTTP {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"{url}: invalid JSON body: {exc}") from exc

    def read(
        self,
        question: str,
        passage: str,
        candidates: Sequence[tuple[int, int]],
    ) -> list[float]:
        """One score per candidate span; retries once on transport failure."""
        payload = {
            "question": question,
            "passage": passage,
            "candidates": [{"start": s, "end": e} for s, e in candidates],
        }
        body = self._post("/read", payload, retries=1)
        scores = body.get("scores")
        if not isinstance(scores, list):
            raise ProtocolError("/read response missing 'scores' list")
        if len(scores) != len(candidates):
            raise ScoreCountMismatchError(
                f"/read returned {len(scores)} scores for {len(candidates)} candidates"
            )
        try:
            return [float(s) for s in scores]
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"/read returned a non-numeric score: {exc}") from exc

    def verbalize(self, units: Sequence[dict]) -> list[str]:
        body = self._post("/verbalize", {"units": list(units)})
        sentences = body.get("sentences")
        if not isinstance(sentences, list) or len(sentences) != len(units):
            raise ProtocolError(
                f"/verbalize returned {None if sentences is None else len(sentences)} "
                f"sentences for {len(units)} units"
            )
        if not all(isinstance(s, str) for s in sentences):
            raise ProtocolError("/verbalize returned a non-string sentence")
        return list(sentences)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        body = self._post("/embed", {"texts": list(texts)})
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError(
                f"/embed returned {None if vectors is None else len(vectors)} "
                f"vectors for {len(texts)} texts"
            )
        lengths = {len(v) for v in vectors}
        if len(lengths) > 1:
            raise ProtocolError(f"/embed vectors have mixed dimensions {sorted(lengths)}")
        return [[float(x) for x in v] for v in vectors]
