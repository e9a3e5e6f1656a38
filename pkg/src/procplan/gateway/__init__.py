"""Uniform client layer over chat, captioning, video generation, and scoring."""

from .cache import ResponseCache, cache_key
from .captions import (
    DEFAULT_MODALITIES,
    CaptionRequest,
    CaptionResult,
    FileCaptioner,
    SIDECAR_SUFFIX,
    StubCaptioner,
    parse_sidecar,
)
from .chat import (
    ChatClient,
    ChatRequest,
    ChatResponse,
    CompletionResult,
    HttpChatBackend,
    STUB_EPOCH,
    StubChatBackend,
)
from .config import ConfigError, Gateway, build_gateway, load_gateway
from .errors import (
    BackendRefused,
    BackendUnavailable,
    CaptionerUnavailable,
    ContextOverflow,
    GatewayError,
    GeneratorUnavailable,
    ScorerUnavailable,
    UnknownJob,
    UnreadableSidecar,
)
from .similarity import (
    HttpSimilarityScorer,
    SimilarityClient,
    SimilarityRequest,
    StubSimilarityScorer,
)
from .video import (
    HttpVideoBackend,
    StubVideoBackend,
    VideoClient,
    VideoJobRequest,
    VideoJobStatus,
)

__all__ = [
    "BackendRefused",
    "BackendUnavailable",
    "CaptionRequest",
    "CaptionResult",
    "CaptionerUnavailable",
    "ChatClient",
    "ChatRequest",
    "ChatResponse",
    "CompletionResult",
    "ConfigError",
    "ContextOverflow",
    "DEFAULT_MODALITIES",
    "FileCaptioner",
    "Gateway",
    "GatewayError",
    "GeneratorUnavailable",
    "HttpChatBackend",
    "HttpSimilarityScorer",
    "HttpVideoBackend",
    "ResponseCache",
    "STUB_EPOCH",
    "ScorerUnavailable",
    "SIDECAR_SUFFIX",
    "SimilarityClient",
    "SimilarityRequest",
    "StubCaptioner",
    "StubChatBackend",
    "StubSimilarityScorer",
    "StubVideoBackend",
    "UnknownJob",
    "UnreadableSidecar",
    "VideoClient",
    "VideoJobRequest",
    "VideoJobStatus",
    "build_gateway",
    "cache_key",
    "load_gateway",
    "parse_sidecar",
]
