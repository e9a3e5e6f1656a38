"""Survey state: comparisons, subjects, blinded assignments, judgments.

Persistence is an append-only judgment log (one line per accepted
submission) plus a subjects snapshot; derived state is rebuilt by replay.
Blinding randomizes left/right presentation per (subject, comparison) and
is undone at ingest, so stored verdicts always refer to canonical sides
(A is the grounded arm by convention).
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..metrics import Aspect, PreferenceTally, Verdict
from ..model import GoalPlan

ASPECTS = tuple(Aspect)


class SurveyError(Exception):
    status_code = 400


class DuplicateSubmission(SurveyError):
    status_code = 409


class IncompleteAspects(SurveyError):
    status_code = 400


class UnknownAssignment(SurveyError):
    status_code = 404


class UnknownSubject(SurveyError):
    status_code = 401


@dataclass(frozen=True)
class StepView:
    index: int
    text: str
    context: str
    video_uri: str | None = None

    def to_doc(self) -> dict:
        return {
            "index": self.index,
            "text": self.text,
            "context": self.context,
            "video_uri": self.video_uri,
        }


@dataclass(frozen=True)
class PlanSide:
    arm: str
    model_id: str
    steps: tuple[StepView, ...]

    def wire_doc(self) -> dict:
        """Blinded payload: step content only, no arm or model identity."""
        return {"steps": [s.to_doc() for s in self.steps]}


@dataclass(frozen=True)
class Comparison:
    id: str
    task_id: str
    task_kind: str
    pairing: str
    side_a: PlanSide
    side_b: PlanSide
    quota: int | None = None


@dataclass
class Subject:
    id: str
    token: str
    seen_task_ids: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class Assignment:
    assignment_id: str
    subject_id: str
    comparison: Comparison
    a_on_left: bool


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def plan_side_from_goal(goal: GoalPlan, model_id: str) -> PlanSide:
    videos = {item.step_index: item.artifact_uri for item in goal.video_plan}
    steps = []
    for step in goal.text_plan.steps:
        steps.append(StepView(
            index=step.index,
            text=step.text,
            context=step.context,
            video_uri=videos.get(step.index),
        ))
    return PlanSide(arm=goal.arm.value, model_id=model_id, steps=tuple(steps))


def _side_from_doc(doc: dict) -> PlanSide:
    return PlanSide(
        arm=doc["arm"],
        model_id=doc["model_id"],
        steps=tuple(
            StepView(
                index=s["index"],
                text=s["text"],
                context=s["context"],
                video_uri=s.get("video_uri"),
            )
            for s in doc["steps"]
        ),
    )


def load_comparisons(path: Path) -> list[Comparison]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for entry in doc["comparisons"]:
        out.append(Comparison(
            id=entry["id"],
            task_id=entry["task_id"],
            task_kind=entry.get("task_kind", "Seen"),
            pairing=entry["pairing"],
            side_a=_side_from_doc(entry["side_a"]),
            side_b=_side_from_doc(entry["side_b"]),
            quota=entry.get("quota"),
        ))
    return out


def dump_comparisons(comparisons) -> dict:
    def side_doc(side: PlanSide) -> dict:
        return {
            "arm": side.arm,
            "model_id": side.model_id,
            "steps": [s.to_doc() for s in side.steps],
        }

    return {
        "comparisons": [
            {
                "id": c.id,
                "task_id": c.task_id,
                "task_kind": c.task_kind,
                "pairing": c.pairing,
                "side_a": side_doc(c.side_a),
                "side_b": side_doc(c.side_b),
                "quota": c.quota,
            }
            for c in comparisons
        ]
    }


class SurveyStore:
    """Single-process store behind the survey endpoints.

    Assignment issuance is advisory; submission is the serialization point
    where the no-repeat-task and duplicate rules are enforced under a lock.
    """

    def __init__(self, root: Path, comparisons, blinding_seed: int = 0):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.blinding_seed = blinding_seed
        self.comparisons: dict[str, Comparison] = {c.id: c for c in comparisons}
        self.subjects: dict[str, Subject] = {}
        self._submissions: dict[tuple[str, str], dict] = {}
        self._lock = threading.Lock()
        self._log_path = self.root / "judgments.jsonl"
        self._subjects_path = self.root / "subjects.json"
        self._replay()

    # -- persistence -----------------------------------------------------------

    def _replay(self) -> None:
        if self._subjects_path.exists():
            doc = json.loads(self._subjects_path.read_text(encoding="utf-8"))
            for entry in doc["subjects"]:
                self.subjects[entry["id"]] = Subject(id=entry["id"], token=entry["token"])
        if self._log_path.exists():
            with self._log_path.open(encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    key = (record["subject_id"], record["comparison_id"])
                    self._submissions[key] = record
                    subject = self.subjects.get(record["subject_id"])
                    comparison = self.comparisons.get(record["comparison_id"])
                    if subject and comparison:
                        subject.seen_task_ids.add(comparison.task_id)

    def _save_subjects(self) -> None:
        doc = {
            "subjects": [
                {"id": s.id, "token": s.token} for s in self.subjects.values()
            ]
        }
        tmp = self._subjects_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        tmp.replace(self._subjects_path)

    # -- subjects ----------------------------------------------------------------

    def register_subject(self, subject_id: str | None = None) -> Subject:
        with self._lock:
            if subject_id is None:
                subject_id = f"subject-{len(self.subjects) + 1:04d}"
            existing = self.subjects.get(subject_id)
            if existing is not None:
                return existing
            token = hashlib.sha256(
                f"{self.blinding_seed}:{subject_id}:token".encode()
            ).hexdigest()[:24]
            subject = Subject(id=subject_id, token=token)
            self.subjects[subject_id] = subject
            self._save_subjects()
            return subject

    def subject_by_token(self, token: str) -> Subject:
        for subject in self.subjects.values():
            if subject.token == token:
                return subject
        raise UnknownSubject("unknown or expired token")

    # -- assignment -----------------------------------------------------------------

    def _complete_count(self, comparison_id: str) -> int:
        return sum(1 for (_, cid) in self._submissions if cid == comparison_id)

    def _a_on_left(self, subject_id: str, comparison_id: str) -> bool:
        digest = hashlib.sha256(
            f"{self.blinding_seed}:{subject_id}:{comparison_id}".encode()
        ).digest()
        return bool(digest[0] & 1)

    def _assignment_id(self, subject_id: str, comparison_id: str) -> str:
        return hashlib.sha256(f"assign:{subject_id}:{comparison_id}".encode()).hexdigest()[:20]

    def next_assignment(self, subject_id: str) -> Assignment | None:
        with self._lock:
            subject = self.subjects.get(subject_id)
            if subject is None:
                raise UnknownSubject(subject_id)
            eligible = []
            for comparison in self.comparisons.values():
                if comparison.task_id in subject.seen_task_ids:
                    continue
                if (subject_id, comparison.id) in self._submissions:
                    continue
                count = self._complete_count(comparison.id)
                if comparison.quota is not None and count >= comparison.quota:
                    continue
                eligible.append((count, comparison.id, comparison))
            if not eligible:
                return None
            eligible.sort(key=lambda entry: (entry[0], entry[1]))
            _, _, comparison = eligible[0]
            return Assignment(
                assignment_id=self._assignment_id(subject_id, comparison.id),
                subject_id=subject_id,
                comparison=comparison,
                a_on_left=self._a_on_left(subject_id, comparison.id),
            )

    def resolve_assignment(self, subject_id: str, assignment_id: str) -> Comparison:
        for comparison in self.comparisons.values():
            if self._assignment_id(subject_id, comparison.id) == assignment_id:
                return comparison
        raise UnknownAssignment(assignment_id)

    # -- submission -------------------------------------------------------------------

    def submit(
        self, subject_id: str, assignment_id: str, verdicts: dict[str, str]
    ) -> dict:
        """Atomically record all four de-blinded verdicts for one assignment.

        Returns {"accepted": True, "duplicate": bool}; an identical replay of
        an already-recorded submission is acknowledged without double
        counting, anything else for the same pair is rejected whole.
        """
        with self._lock:
            subject = self.subjects.get(subject_id)
            if subject is None:
                raise UnknownSubject(subject_id)
            comparison = self.resolve_assignment(subject_id, assignment_id)

            missing = [a.value for a in ASPECTS if a.value not in verdicts]
            extra = [k for k in verdicts if k not in {a.value for a in ASPECTS}]
            if missing or extra:
                raise IncompleteAspects(
                    f"verdicts must cover exactly the four aspects; missing={missing} extra={extra}"
                )
            for aspect_value, side in verdicts.items():
                if side not in ("Left", "Tie", "Right"):
                    raise IncompleteAspects(f"{aspect_value}: verdict must be Left, Tie, or Right")

            a_on_left = self._a_on_left(subject_id, comparison.id)
            canonical = {}
            for aspect_value, side in verdicts.items():
                if side == "Tie":
                    canonical[aspect_value] = Verdict.TIE.value
                elif (side == "Left") == a_on_left:
                    canonical[aspect_value] = Verdict.WIN_A.value
                else:
                    canonical[aspect_value] = Verdict.WIN_B.value

            key = (subject_id, comparison.id)
            previous = self._submissions.get(key)
            if previous is not None:
                if previous["verdicts"] == canonical:
                    return {"accepted": True, "duplicate": True}
                raise DuplicateSubmission(
                    f"subject {subject_id!r} already judged comparison {comparison.id!r}"
                )

            record = {
                "subject_id": subject_id,
                "comparison_id": comparison.id,
                "assignment_id": assignment_id,
                "verdicts": canonical,
                "submitted_at": _now(),
            }
            with self._log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True) + "\n")
            self._submissions[key] = record
            subject.seen_task_ids.add(comparison.task_id)
            return {"accepted": True, "duplicate": False}

    # -- export ----------------------------------------------------------------------------

    def export_tallies(
        self, pairing: str | None = None, task_kind: str | None = None
    ) -> dict[str, dict[str, PreferenceTally]]:
        """De-blinded tallies grouped by pairing then aspect."""
        out: dict[str, dict[str, PreferenceTally]] = {}
        for (_, comparison_id), record in self._submissions.items():
            comparison = self.comparisons[comparison_id]
            if pairing is not None and comparison.pairing != pairing:
                continue
            if task_kind is not None and comparison.task_kind != task_kind:
                continue
            group = out.setdefault(comparison.pairing, {})
            for aspect_value, verdict_value in record["verdicts"].items():
                tally = group.get(aspect_value) or PreferenceTally(Aspect(aspect_value))
                win = tally.win + (verdict_value == Verdict.WIN_A.value)
                tie = tally.tie + (verdict_value == Verdict.TIE.value)
                lose = tally.lose + (verdict_value == Verdict.WIN_B.value)
                group[aspect_value] = PreferenceTally(Aspect(aspect_value), win, tie, lose)
        return out

    def judgment_count(self) -> int:
        return sum(len(r["verdicts"]) for r in self._submissions.values())
