"""Gateway error taxonomy shared by all capability clients."""

from __future__ import annotations


class GatewayError(Exception):
    pass


class BackendUnavailable(GatewayError):
    """Transport kept failing after the configured retries."""


class BackendRefused(GatewayError):
    """Non-retryable backend response; carries the raw body for audit."""

    def __init__(self, message: str, body: str = ""):
        self.body = body
        super().__init__(message)


class ContextOverflow(GatewayError):
    """Prompt exceeded the backend's reported context window."""


class CaptionerUnavailable(GatewayError):
    pass


class UnreadableSidecar(GatewayError):
    pass


class UnknownJob(GatewayError):
    pass


class GeneratorUnavailable(GatewayError):
    pass


class ScorerUnavailable(GatewayError):
    pass
