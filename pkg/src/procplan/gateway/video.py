"""Text-to-video job clients: submit/poll with idempotent submission.

Submission is content-addressed: resubmitting an identical request returns
the existing job. Terminal job states never change once reached.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import httpx

from ..model import JobStatus
from .cache import cache_key
from .errors import GeneratorUnavailable, UnknownJob


@dataclass(frozen=True)
class VideoJobRequest:
    prompt: str
    duration_hint_sec: float = 2.0
    seed: int = 0


@dataclass(frozen=True)
class VideoJobStatus:
    job_id: str
    status: JobStatus
    artifact_uri: str | None = None
    error: str | None = None


class StubVideoBackend:
    """In-memory generator: Pending until ``polls_to_done`` polls, then Done.

    Prompts containing any of ``fail_prompts`` fail instead, exercising the
    per-step failure paths.
    """

    backend_id = "stub-video"

    def __init__(self, polls_to_done: int = 1, fail_prompts: tuple[str, ...] = ()):
        self.polls_to_done = polls_to_done
        self.fail_prompts = fail_prompts
        self._jobs: dict[str, VideoJobRequest] = {}
        self._polls: dict[str, int] = {}
        self._final: dict[str, VideoJobStatus] = {}
        self._lock = threading.Lock()
        self.submissions = 0

    def _job_id(self, request: VideoJobRequest) -> str:
        return cache_key(
            capability="video",
            backend_id=self.backend_id,
            model_id="",
            params=None,
            payload={
                "prompt": request.prompt,
                "duration_hint_sec": request.duration_hint_sec,
                "seed": request.seed,
            },
        )[:32]

    def submit(self, request: VideoJobRequest) -> str:
        job_id = self._job_id(request)
        with self._lock:
            if job_id not in self._jobs:
                self._jobs[job_id] = request
                self._polls[job_id] = 0
                self.submissions += 1
        return job_id

    def poll(self, job_id: str) -> VideoJobStatus:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownJob(job_id)
            final = self._final.get(job_id)
            if final is not None:
                return final
            self._polls[job_id] += 1
            if self._polls[job_id] < self.polls_to_done:
                return VideoJobStatus(job_id=job_id, status=JobStatus.PENDING)
            request = self._jobs[job_id]
            if any(needle in request.prompt for needle in self.fail_prompts):
                final = VideoJobStatus(
                    job_id=job_id, status=JobStatus.FAILED, error="stub generator refused prompt"
                )
            else:
                final = VideoJobStatus(
                    job_id=job_id,
                    status=JobStatus.DONE,
                    artifact_uri=f"stub://videos/{job_id}.mp4",
                )
            self._final[job_id] = final
            return final


class HttpVideoBackend:
    """Minimal submit/poll wire client: POST /jobs then GET /jobs/{id}."""

    backend_id = "http-video"

    def __init__(self, endpoint: str, timeout: float = 60.0, client: httpx.Client | None = None):
        self.endpoint = endpoint.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)

    def submit(self, request: VideoJobRequest) -> str:
        try:
            response = self._client.post(
                f"{self.endpoint}/jobs",
                json={
                    "prompt": request.prompt,
                    "duration_sec": request.duration_hint_sec,
                    "seed": request.seed,
                },
            )
            response.raise_for_status()
            return str(response.json()["job_id"])
        except (httpx.HTTPError, KeyError, ValueError) as err:
            raise GeneratorUnavailable(str(err)) from err

    def poll(self, job_id: str) -> VideoJobStatus:
        try:
            response = self._client.get(f"{self.endpoint}/jobs/{job_id}")
        except httpx.HTTPError as err:
            raise GeneratorUnavailable(str(err)) from err
        if response.status_code == 404:
            raise UnknownJob(job_id)
        try:
            doc = response.json()
            return VideoJobStatus(
                job_id=job_id,
                status=JobStatus(doc["status"]),
                artifact_uri=doc.get("artifact_uri"),
                error=doc.get("error"),
            )
        except (KeyError, ValueError) as err:
            raise GeneratorUnavailable(f"malformed job status: {err}") from err


class VideoClient:
    """Thin pass-through that preserves the backend's idempotency contract."""

    def __init__(self, backend):
        self.backend = backend

    def submit(self, request: VideoJobRequest) -> str:
        return self.backend.submit(request)

    def poll(self, job_id: str) -> VideoJobStatus:
        return self.backend.poll(job_id)

    def run_to_completion(self, request: VideoJobRequest, max_polls: int = 100) -> VideoJobStatus:
        job_id = self.submit(request)
        status = self.poll(job_id)
        polls = 1
        while status.status in (JobStatus.PENDING, JobStatus.RUNNING) and polls < max_polls:
            status = self.poll(job_id)
            polls += 1
        return status
