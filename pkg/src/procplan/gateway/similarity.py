"""Image-text similarity scoring with caching and range clamping."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import httpx

from .cache import ResponseCache, cache_key
from .errors import ScorerUnavailable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityRequest:
    image_ref: str
    text: str


class StubSimilarityScorer:
    """Constant or hash-derived score in [-1, 1]; pure function of the request."""

    backend_id = "stub-similarity"

    def __init__(self, constant: float | None = 0.5, seed: int = 0):
        self.constant = constant
        self.seed = seed

    def score(self, request: SimilarityRequest) -> float:
        if self.constant is not None:
            return self.constant
        material = f"{self.seed}\x00{request.image_ref}\x00{request.text}".encode("utf-8")
        value = int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
        return (value / 2**63) - 1.0  # uniform-ish in [-1, 1)


class HttpSimilarityScorer:
    backend_id = "http-similarity"

    def __init__(self, endpoint: str, timeout: float = 60.0, client: httpx.Client | None = None):
        self.endpoint = endpoint.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)

    def score(self, request: SimilarityRequest) -> float:
        try:
            response = self._client.post(
                f"{self.endpoint}/similarity",
                json={"image_ref": request.image_ref, "text": request.text},
            )
            response.raise_for_status()
            return float(response.json()["score"])
        except (httpx.HTTPError, KeyError, ValueError) as err:
            raise ScorerUnavailable(str(err)) from err


class SimilarityClient:
    """Caches scores by request identity and clamps out-of-range backends."""

    def __init__(self, backend, cache: ResponseCache | None = None):
        self.backend = backend
        self.cache = cache or ResponseCache(None)
        self.warnings: list[str] = []
        self.cache_hits = 0

    def _key(self, request: SimilarityRequest) -> str:
        return cache_key(
            capability="similarity",
            backend_id=self.backend.backend_id,
            model_id="",
            params=None,
            payload={"image_ref": request.image_ref, "text": request.text},
        )

    def score(self, request: SimilarityRequest) -> float:
        key = self._key(request)
        stored = self.cache.get(key)
        if stored is not None:
            self.cache_hits += 1
            return stored["score"]
        value = self.backend.score(request)
        if not -1.0 <= value <= 1.0:
            message = f"similarity {value} outside [-1, 1]; clamped"
            self.warnings.append(message)
            logger.warning(message)
            value = max(-1.0, min(1.0, value))
        self.cache.put(key, {"score": value})
        return value
