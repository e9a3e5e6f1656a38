"""Backend configuration: capability -> {kind, endpoint, model_id, auth env, stub seed}.

Secrets are only ever read from the environment variables named here; they
are never written to disk. Stub backends make every capability runnable
offline and deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .cache import ResponseCache
from .captions import FileCaptioner, StubCaptioner
from .chat import ChatClient, HttpChatBackend, StubChatBackend
from .similarity import HttpSimilarityScorer, SimilarityClient, StubSimilarityScorer
from .video import HttpVideoBackend, StubVideoBackend, VideoClient


class ConfigError(ValueError):
    pass


@dataclass
class Gateway:
    chat: ChatClient
    captioner: object
    video: VideoClient
    similarity: SimilarityClient
    chat_model_id: str = "stub-model"

    @classmethod
    def default_stub(
        cls,
        cache_dir: Path | None = None,
        seed: int = 0,
        polls_to_done: int = 1,
    ) -> "Gateway":
        cache = ResponseCache(cache_dir)
        return cls(
            chat=ChatClient(StubChatBackend(seed=seed), cache=cache),
            captioner=StubCaptioner(seed=seed),
            video=VideoClient(StubVideoBackend(polls_to_done=polls_to_done)),
            similarity=SimilarityClient(StubSimilarityScorer(), cache=cache),
            chat_model_id="stub-model",
        )


def _kind(entry: dict, allowed: tuple[str, ...], capability: str) -> str:
    kind = entry.get("kind", "stub")
    if kind == "real":
        kind = "http"
    if kind not in allowed:
        raise ConfigError(f"{capability}: kind must be one of {allowed}, got {kind!r}")
    return kind


def build_gateway(config: dict, cache_dir: Path | None = None) -> Gateway:
    if cache_dir is None and config.get("cache_dir"):
        cache_dir = Path(config["cache_dir"])
    cache = ResponseCache(cache_dir)

    chat_cfg = config.get("chat", {})
    chat_kind = _kind(chat_cfg, ("stub", "http"), "chat")
    if chat_kind == "stub":
        chat_backend = StubChatBackend(
            seed=int(chat_cfg.get("stub_seed", 0)),
            backend_id=chat_cfg.get("backend_id", "stub-chat"),
        )
    else:
        if "endpoint" not in chat_cfg:
            raise ConfigError("chat: http backend requires an endpoint")
        chat_backend = HttpChatBackend(
            endpoint=chat_cfg["endpoint"],
            backend_id=chat_cfg.get("backend_id", "http-chat"),
            auth_env=chat_cfg.get("auth_env"),
        )

    captioner_cfg = config.get("captioner", {"kind": "file"})
    captioner_kind = _kind(captioner_cfg, ("stub", "file"), "captioner")
    if captioner_kind == "stub":
        captioner = StubCaptioner(seed=int(captioner_cfg.get("stub_seed", 0)))
    else:
        root = captioner_cfg.get("sidecar_root")
        captioner = FileCaptioner(Path(root) if root else None)

    video_cfg = config.get("video", {})
    video_kind = _kind(video_cfg, ("stub", "http"), "video")
    if video_kind == "stub":
        video_backend = StubVideoBackend(polls_to_done=int(video_cfg.get("polls_to_done", 1)))
    else:
        if "endpoint" not in video_cfg:
            raise ConfigError("video: http backend requires an endpoint")
        video_backend = HttpVideoBackend(endpoint=video_cfg["endpoint"])

    sim_cfg = config.get("similarity", {})
    sim_kind = _kind(sim_cfg, ("stub", "http"), "similarity")
    if sim_kind == "stub":
        constant = sim_cfg.get("constant", 0.5)
        scorer = StubSimilarityScorer(
            constant=None if constant is None else float(constant),
            seed=int(sim_cfg.get("stub_seed", 0)),
        )
    else:
        if "endpoint" not in sim_cfg:
            raise ConfigError("similarity: http backend requires an endpoint")
        scorer = HttpSimilarityScorer(endpoint=sim_cfg["endpoint"])

    return Gateway(
        chat=ChatClient(chat_backend, cache=cache),
        captioner=captioner,
        video=VideoClient(video_backend),
        similarity=SimilarityClient(scorer, cache=cache),
        chat_model_id=chat_cfg.get("model_id", "stub-model"),
    )


def load_gateway(path: Path, cache_dir: Path | None = None) -> Gateway:
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"backend config is not valid JSON: {err}") from err
    if not isinstance(config, dict):
        raise ConfigError("backend config must be a JSON object")
    return build_gateway(config, cache_dir=cache_dir)
