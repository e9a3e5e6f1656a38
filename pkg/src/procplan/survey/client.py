"""HTTP client for the survey endpoints; drives headless testing and the CLI."""

from __future__ import annotations

import threading

import httpx

_shared_client: httpx.Client | None = None
_shared_lock = threading.Lock()


def _default_client() -> httpx.Client:
    # one pooled client per process: construction is expensive (TLS context)
    # and short-lived CLI-style callers would otherwise pay it per command
    global _shared_client
    with _shared_lock:
        if _shared_client is None:
            _shared_client = httpx.Client(timeout=30.0)
        return _shared_client


class SurveyClientError(Exception):
    def __init__(self, status_code: int, error: str, detail: str = ""):
        self.status_code = status_code
        self.error = error
        super().__init__(f"{error} ({status_code}): {detail}")


class SurveyClient:
    def __init__(self, base_url: str, token: str | None = None, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self._client = client or _default_client()

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def _check(self, response: httpx.Response) -> dict:
        if response.status_code >= 400:
            try:
                doc = response.json()
                raise SurveyClientError(
                    response.status_code,
                    doc.get("error", "HTTPError"),
                    doc.get("detail", ""),
                )
            except ValueError:
                raise SurveyClientError(response.status_code, "HTTPError", response.text) from None
        return response.json()

    def register(self, subject_id: str | None = None) -> dict:
        doc = self._check(
            self._client.post(f"{self.base_url}/api/subjects", json={"subject_id": subject_id})
        )
        self.token = doc["token"]
        return doc

    def next_assignment(self) -> dict | None:
        doc = self._check(
            self._client.get(f"{self.base_url}/api/assignments/next", headers=self._headers())
        )
        return doc if doc.get("available") else None

    def submit(self, assignment_id: str, verdicts: dict[str, str]) -> dict:
        return self._check(
            self._client.post(
                f"{self.base_url}/api/judgments",
                json={"assignment_id": assignment_id, "verdicts": verdicts},
                headers=self._headers(),
            )
        )

    def export(self, admin_token: str, pairing: str | None = None, kind: str | None = None) -> dict:
        params = {}
        if pairing:
            params["pairing"] = pairing
        if kind:
            params["kind"] = kind
        return self._check(
            self._client.get(
                f"{self.base_url}/api/export",
                params=params,
                headers={"Authorization": f"Bearer {admin_token}"},
            )
        )
