"""HTTP endpoints for the survey service.

Wire protocol: JSON bodies over standard web transport. Evaluators
authenticate with their pre-issued subject token; the export endpoint
requires the admin token. Assignment payloads are blinded: left/right
step content only, never arm or model identity. When a built UI bundle
directory is supplied its static assets are served at the root.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .store import Subject, SurveyError, SurveyStore


class RegisterBody(BaseModel):
    subject_id: str | None = None


class JudgmentBody(BaseModel):
    assignment_id: str
    verdicts: dict[str, str]


def _bearer(authorization: str | None) -> str:
    if not authorization or not authorization.startswith("Bearer "):
        raise HTTPException(status_code=401, detail="missing bearer token")
    return authorization.removeprefix("Bearer ").strip()


def create_app(
    store: SurveyStore,
    admin_token: str,
    ui_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="plan comparison survey")

    @app.exception_handler(SurveyError)
    async def survey_error_handler(request, exc: SurveyError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def subject_from(authorization: str | None) -> Subject:
        return store.subject_by_token(_bearer(authorization))

    @app.post("/api/subjects")
    def register(body: RegisterBody | None = None):
        subject = store.register_subject(body.subject_id if body else None)
        return {"subject_id": subject.id, "token": subject.token}

    @app.get("/api/assignments/next")
    def next_assignment(authorization: str | None = Header(default=None)):
        subject = subject_from(authorization)
        assignment = store.next_assignment(subject.id)
        if assignment is None:
            return {"available": False}
        comparison = assignment.comparison
        left = comparison.side_a if assignment.a_on_left else comparison.side_b
        right = comparison.side_b if assignment.a_on_left else comparison.side_a
        return {
            "available": True,
            "assignment_id": assignment.assignment_id,
            "comparison_id": comparison.id,
            "task_id": comparison.task_id,
            "left": left.wire_doc(),
            "right": right.wire_doc(),
        }

    @app.post("/api/judgments")
    def submit(body: JudgmentBody, authorization: str | None = Header(default=None)):
        subject = subject_from(authorization)
        return store.submit(subject.id, body.assignment_id, body.verdicts)

    @app.get("/api/export")
    def export(
        authorization: str | None = Header(default=None),
        pairing: str | None = Query(default=None),
        kind: str | None = Query(default=None),
    ):
        if _bearer(authorization) != admin_token:
            raise HTTPException(status_code=403, detail="admin token required")
        tallies = store.export_tallies(pairing=pairing, task_kind=kind)
        return {
            "tallies": {
                group: {
                    aspect: {"win": t.win, "tie": t.tie, "lose": t.lose}
                    for aspect, t in aspects.items()
                }
                for group, aspects in tallies.items()
            }
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
