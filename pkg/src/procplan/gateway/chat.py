"""Chat completion clients: HTTP backend, deterministic stub, cache wrapper.

The wire contract is a message-based completion endpoint: (model, system
message, user message, sampling params) in, first completion's text out.
Responses are captured verbatim; trimming is the parser's business.
"""

from __future__ import annotations

import hashlib
import os
import random
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import httpx

from ..model import InferenceParams
from .cache import ResponseCache, cache_key
from .errors import BackendRefused, BackendUnavailable, ContextOverflow

STUB_EPOCH = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    system_prompt: str
    user_prompt: str
    params: InferenceParams
    template_version: str = ""


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend_id: str
    latency_ms: float
    cached: bool
    created_at: str


@dataclass(frozen=True)
class CompletionResult:
    text: str
    created_at: str


class TransientTransportError(Exception):
    """Internal marker: the attempt may be retried."""


def _request_digest(request: ChatRequest) -> str:
    material = f"{request.model_id}\x00{request.system_prompt}\x00{request.user_prompt}"
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class HttpChatBackend:
    """POSTs an OpenAI-style chat completion body and takes the first choice."""

    def __init__(
        self,
        endpoint: str,
        backend_id: str = "http-chat",
        auth_env: str | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.backend_id = backend_id
        self.auth_env = auth_env
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: ChatRequest) -> CompletionResult:
        body = {
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.params.temperature,
            "top_k": request.params.top_k,
            "top_p": request.params.top_p,
            "min_p": request.params.min_p,
        }
        try:
            response = self._client.post(self.endpoint, json=body, headers=self._headers())
        except httpx.TransportError as err:
            raise TransientTransportError(str(err)) from err
        if response.status_code >= 500:
            raise TransientTransportError(f"server error {response.status_code}")
        if response.status_code >= 400:
            lowered = response.text.lower()
            if "context" in lowered and ("length" in lowered or "window" in lowered or "token" in lowered):
                raise ContextOverflow(response.text)
            raise BackendRefused(f"status {response.status_code}", body=response.text)
        try:
            doc = response.json()
            choice = doc["choices"][0]
            text = choice["message"]["content"] if "message" in choice else choice["text"]
            if not isinstance(text, str):
                raise TypeError("completion text is not a string")
        except Exception:
            raise BackendRefused("malformed completion envelope", body=response.text) from None
        return CompletionResult(text=text, created_at=_now_iso())


_SCORE_PLACEHOLDER_RE = re.compile(r"^SCORE ([a-z0-9_]+) = <0 to ([0-9.]+)>$", re.MULTILINE)
_FEEDBACK_PLACEHOLDER_RE = re.compile(r"^FEEDBACK ([a-z0-9_]+):", re.MULTILINE)

_VERBS = (
    ("prepare", "preparing"), ("rinse", "rinsing"), ("slice", "slicing"),
    ("mix", "mixing"), ("heat", "heating"), ("pour", "pouring"),
    ("arrange", "arranging"), ("measure", "measuring"), ("stir", "stirring"),
    ("fold", "folding"),
)
_OBJECTS = (
    "the ingredients", "the utensils", "the mixture", "the workspace",
    "the produce", "the container", "the tools", "the surface",
)


class StubChatBackend:
    """Deterministic offline chat backend.

    Output is a pure function of (request digest, seed): the same request
    yields byte-identical text in any process. The synthesized text matches
    the prompt family (step list, person-verb-action captions, labeled
    triples, or a judge score block) so full pipeline runs parse cleanly.
    ``responses`` maps a prompt substring to a canned reply (checked in
    sorted order before synthesis).
    """

    def __init__(
        self,
        seed: int = 0,
        backend_id: str = "stub-chat",
        responses: dict[str, str] | None = None,
    ):
        self.seed = seed
        self.backend_id = backend_id
        self.responses = dict(responses or {})
        self.calls: list[str] = []

    def _rng(self, digest: str, salt: str = "") -> random.Random:
        material = f"{self.seed}\x00{digest}\x00{salt}".encode("utf-8")
        return random.Random(int.from_bytes(hashlib.sha256(material).digest()[:8], "big"))

    def complete(self, request: ChatRequest) -> CompletionResult:
        digest = _request_digest(request)
        self.calls.append(digest)
        text = self._text_for(request, digest)
        return CompletionResult(text=text, created_at=STUB_EPOCH)

    def _text_for(self, request: ChatRequest, digest: str) -> str:
        prompt = request.user_prompt
        for needle in sorted(self.responses):
            if needle in prompt:
                return self.responses[needle]
        if "SCORE " in prompt:
            return self._judge_block(prompt, digest)
        if "<text>" in prompt:
            return self._triples(digest)
        if "<person> <verb> <action>" in prompt:
            return self._person_sentences(digest)
        if "step-by-step procedure" in prompt:
            return self._numbered_steps(digest)
        return "OK."

    def _pick_actions(self, rng: random.Random, n: int) -> list[tuple[str, str, str]]:
        actions = []
        for _ in range(n):
            verb, verb_ing = _VERBS[rng.randrange(len(_VERBS))]
            obj = _OBJECTS[rng.randrange(len(_OBJECTS))]
            actions.append((verb, verb_ing, obj))
        return actions

    def _numbered_steps(self, digest: str) -> str:
        rng = self._rng(digest, "vanilla")
        lines = []
        for i, (verb, _ing, obj) in enumerate(self._pick_actions(rng, 4 + rng.randrange(4))):
            lines.append(
                f"{i + 1}. {verb.capitalize()} {obj}. "
                f"Take your time and {verb} {obj} evenly before moving on."
            )
        return "\n".join(lines)

    def _person_sentences(self, digest: str) -> str:
        rng = self._rng(digest, "foc")
        lines = []
        for i, (verb, _ing, obj) in enumerate(self._pick_actions(rng, 3 + rng.randrange(4))):
            subject = "A person" if i % 2 == 0 else "The person"
            verb_s = verb + ("es" if verb.endswith(("s", "x", "sh", "ch")) else "s")
            lines.append(f"{i + 1}. {subject} {verb_s} {obj}.")
        return "\n".join(lines)

    def _triples(self, digest: str) -> str:
        rng = self._rng(digest, "align")
        blocks = []
        for i, (verb, verb_ing, obj) in enumerate(self._pick_actions(rng, 4 + rng.randrange(4))):
            blocks.append(
                f"Step {i + 1}:\n"
                f"Text: {verb.capitalize()} {obj}.\n"
                f"Context: Carefully {verb} {obj} so the result stays consistent.\n"
                f"Visual: A person {verb_ing} {obj} on a clean counter."
            )
        return "\n\n".join(blocks)

    def _judge_block(self, prompt: str, digest: str) -> str:
        lines = []
        for criterion, cap in _SCORE_PLACEHOLDER_RE.findall(prompt):
            rng = self._rng(digest, f"score:{criterion}")
            cap_value = float(cap)
            fraction = 0.6 + 0.4 * rng.random()
            value = min(cap_value, round(cap_value * fraction * 2) / 2)
            formatted = f"{value:g}"
            lines.append(f"SCORE {criterion} = {formatted}")
        for aspect in _FEEDBACK_PLACEHOLDER_RE.findall(prompt):
            lines.append(
                f"FEEDBACK {aspect}: The plan covers this aspect adequately with room to improve."
            )
        return "\n".join(lines)


class ChatClient:
    """Cache-aware, retrying chat front door shared by every pipeline stage."""

    def __init__(
        self,
        backend,
        cache: ResponseCache | None = None,
        retries: int = 3,
        backoff_base: float = 1.0,
        sleep=time.sleep,
    ):
        self.backend = backend
        self.cache = cache or ResponseCache(None)
        self.retries = retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.cache_hits = 0
        self.backend_calls = 0

    def _key(self, request: ChatRequest) -> str:
        return cache_key(
            capability="chat",
            backend_id=self.backend.backend_id,
            model_id=request.model_id,
            params=request.params,
            payload={"system": request.system_prompt, "user": request.user_prompt},
            template_version=request.template_version,
        )

    def chat(self, request: ChatRequest) -> ChatResponse:
        key = self._key(request)
        stored = self.cache.get(key)
        if stored is not None:
            self.cache_hits += 1
            return ChatResponse(
                text=stored["text"],
                backend_id=stored["backend_id"],
                latency_ms=stored["latency_ms"],
                cached=True,
                created_at=stored["created_at"],
            )

        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                start = time.perf_counter()
                self.backend_calls += 1
                result = self.backend.complete(request)
                latency_ms = (time.perf_counter() - start) * 1000
                break
            except TransientTransportError as err:
                last_error = err
                if attempt + 1 < self.retries:
                    self._sleep(self.backoff_base * (2 ** attempt))
        else:
            raise BackendUnavailable(
                f"{self.backend.backend_id}: {last_error}"
            ) from last_error

        self.cache.put(key, {
            "text": result.text,
            "backend_id": self.backend.backend_id,
            "latency_ms": latency_ms,
            "created_at": result.created_at,
        })
        return ChatResponse(
            text=result.text,
            backend_id=self.backend.backend_id,
            latency_ms=latency_ms,
            cached=False,
            created_at=result.created_at,
        )
