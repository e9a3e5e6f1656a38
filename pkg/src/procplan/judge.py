"""Rubric-driven plan judging via a chat model.

A 100-point rubric (4 aspects x 25) with fixed sub-criterion caps. The
judge prompt walks Socratic stages and demands a machine-parsable score
block; parsing recomputes all totals and enforces every cap, so a sloppy
judge cannot smuggle in bad arithmetic. Scores are decimals end to end
(half points are legal).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .model import InferenceParams, Provenance
from .prompts import RenderedPrompt, text_digest


class JudgeError(Exception):
    pass


class MissingCriterion(JudgeError):
    def __init__(self, missing: list[str], raw: str):
        self.missing = missing
        self.raw = raw
        super().__init__(f"criteria never scored: {', '.join(missing)}")


class ScoreOutOfRange(JudgeError):
    def __init__(self, criterion: str, value: Decimal, cap: Decimal):
        self.criterion = criterion
        self.value = value
        self.cap = cap
        super().__init__(f"{criterion} scored {value}, cap is {cap}")


class RubricInconsistent(JudgeError):
    pass


@dataclass(frozen=True)
class Component:
    id: str
    label: str
    cap: Decimal


@dataclass(frozen=True)
class SubCriterion:
    id: str
    label: str
    cap: Decimal
    question: str
    components: tuple[Component, ...] = ()


@dataclass(frozen=True)
class RubricAspect:
    id: str
    label: str
    cap: Decimal
    description: str
    sub_criteria: tuple[SubCriterion, ...]


@dataclass(frozen=True)
class Rubric:
    aspects: tuple[RubricAspect, ...]

    def check(self) -> None:
        total = Decimal(0)
        for aspect in self.aspects:
            sub_total = sum((s.cap for s in aspect.sub_criteria), Decimal(0))
            if sub_total != aspect.cap:
                raise RubricInconsistent(
                    f"{aspect.id}: sub-criteria caps sum to {sub_total}, aspect cap is {aspect.cap}"
                )
            for sub in aspect.sub_criteria:
                if sub.components:
                    comp_total = sum((c.cap for c in sub.components), Decimal(0))
                    if comp_total != sub.cap:
                        raise RubricInconsistent(
                            f"{sub.id}: component caps sum to {comp_total}, cap is {sub.cap}"
                        )
            total += aspect.cap
        if total != Decimal(100):
            raise RubricInconsistent(f"aspect caps sum to {total}, must be 100")

    def sub_criteria(self) -> list[SubCriterion]:
        return [s for a in self.aspects for s in a.sub_criteria]

    def cap_table(self) -> dict[str, Decimal]:
        """Every scoreable id (sub-criteria plus their leaf components)."""
        table: dict[str, Decimal] = {}
        for sub in self.sub_criteria():
            table[sub.id] = sub.cap
            for comp in sub.components:
                table[comp.id] = comp.cap
        return table


def _d(value: str) -> Decimal:
    return Decimal(value)


def default_rubric() -> Rubric:
    rubric = Rubric(aspects=(
        RubricAspect(
            id="textual_informativeness",
            label="Textual Informativeness",
            cap=_d("25"),
            description=(
                "Clarity, comprehensiveness, detail, and overall quality of the "
                "instructional text."
            ),
            sub_criteria=(
                SubCriterion(
                    "comprehensiveness", "Comprehensiveness", _d("10"),
                    "Are all necessary steps included (essential steps, up to 5), and "
                    "is useful supplementary detail such as background, optional steps, "
                    "or alternative methods provided (additional information, up to 5)?",
                    components=(
                        Component("essential_steps", "Essential steps", _d("5")),
                        Component("additional_info", "Additional information", _d("5")),
                    ),
                ),
                SubCriterion(
                    "clarity_precision", "Clarity & Precision", _d("10"),
                    "Is the language clear and simple (language clarity, up to 5), and "
                    "are actions, measurements, and conditions described precisely "
                    "(specificity, up to 5)?",
                    components=(
                        Component("language_clarity", "Language clarity", _d("5")),
                        Component("specificity", "Specificity", _d("5")),
                    ),
                ),
                SubCriterion(
                    "detail_level", "Detail Level", _d("5"),
                    "Are ingredients, tools, and equipment listed specifically "
                    "(up to 2.5), and are complex actions broken into manageable "
                    "components (up to 2.5)?",
                    components=(
                        Component("ingredient_tool_specs", "Ingredient & tool specifications", _d("2.5")),
                        Component("step_breakdown", "Step-by-step breakdown", _d("2.5")),
                    ),
                ),
            ),
        ),
        RubricAspect(
            id="visual_informativeness",
            label="Visual Informativeness",
            cap=_d("25"),
            description=(
                "How effectively the visual descriptions convey the steps and elements."
            ),
            sub_criteria=(
                SubCriterion(
                    "visualization_cues", "Visualization Cues", _d("10"),
                    "Do descriptive elements help visualize the actions and objects?",
                ),
                SubCriterion(
                    "imagery_description", "Imagery Description", _d("10"),
                    "How well do the instructions create a visual of the process?",
                ),
                SubCriterion(
                    "examples_analogies", "Use of Examples and Analogies", _d("5"),
                    "Do examples or illustrations aid visualization?",
                ),
            ),
        ),
        RubricAspect(
            id="temporal_alignment",
            label="Temporal Alignment",
            cap=_d("25"),
            description="Logical sequencing and timing information in the instructions.",
            sub_criteria=(
                SubCriterion(
                    "chronological_order", "Chronological Order", _d("10"),
                    "Are the steps presented in a logical sequence?",
                ),
                SubCriterion(
                    "time_indications", "Time Indications", _d("10"),
                    "Is time-related information present and accurate?",
                ),
                SubCriterion(
                    "simultaneous_actions", "Simultaneous Actions", _d("5"),
                    "How well are simultaneous or overlapping actions handled?",
                ),
            ),
        ),
        RubricAspect(
            id="plan_accuracy",
            label="Plan Accuracy",
            cap=_d("25"),
            description=(
                "Accuracy and practicality of the instructions in guiding the user to "
                "complete the task."
            ),
            sub_criteria=(
                SubCriterion(
                    "correctness_of_steps", "Correctness of Steps", _d("15"),
                    "Do the steps align with the actual task requirements?",
                ),
                SubCriterion(
                    "consistency", "Consistency", _d("5"),
                    "Are the instructions consistent and free of contradictions?",
                ),
                SubCriterion(
                    "practicality_feasibility", "Practicality & Feasibility", _d("5"),
                    "Are the instructions applicable and easy to execute in the real world?",
                ),
            ),
        ),
    ))
    rubric.check()
    return rubric


@dataclass
class AspectScores:
    sub_scores: dict[str, Decimal]
    aspect_totals: dict[str, Decimal]
    grand_total: Decimal
    feedback: dict[str, str] = field(default_factory=dict)


def build_judge_prompt(plan_text: str, task_title: str, rubric: Rubric | None = None) -> RenderedPrompt:
    """Deterministic Socratic evaluation prompt with one score line per sub-criterion."""
    if not plan_text or not plan_text.strip():
        raise JudgeError("plan text must be nonempty")
    rubric = rubric or default_rubric()

    lines: list[str] = []
    lines.append(
        f"You are evaluating a procedural plan for the task: {task_title}"
    )
    lines.append("")
    lines.append("Work through the following stages in order.")
    lines.append(
        "Stage 1. Identify the key points of the task: what must be achieved, "
        "with which materials, and in what order."
    )
    lines.append(
        "Stage 2. Propose the cause-and-effect relationships between the steps: "
        "which steps enable later ones, and what would fail if they were skipped "
        "or reordered."
    )
    lines.append("Stage 3. Read the plan under evaluation, presented below.")
    lines.append("")
    lines.append("--- PLAN ---")
    lines.append(plan_text.strip())
    lines.append("--- END PLAN ---")
    lines.append("")
    lines.append(
        "Stage 4. Answer each scoring question. After the questions, output one "
        "score line per criterion in exactly the form shown, followed by one "
        "feedback line per aspect."
    )
    lines.append("")
    for aspect in rubric.aspects:
        lines.append(f"{aspect.label} (out of {aspect.cap}): {aspect.description}")
        for sub in aspect.sub_criteria:
            lines.append(f"- {sub.label} (up to {sub.cap}): {sub.question}")
        lines.append("")
    lines.append("Output the score block now, one line per criterion:")
    for aspect in rubric.aspects:
        for sub in aspect.sub_criteria:
            lines.append(f"SCORE {sub.id} = <0 to {sub.cap}>")
    lines.append("")
    lines.append("Then one feedback line per aspect:")
    for aspect in rubric.aspects:
        lines.append(f"FEEDBACK {aspect.id}: <strengths and areas for improvement>")

    text = "\n".join(lines)
    return RenderedPrompt(template_version="judge-v1", text=text, digest=text_digest(text))


_SCORE_RE = re.compile(r"^\s*\**\s*SCORE\s+([a-z0-9_]+)\s*=\s*\**\s*([0-9]+(?:\.[0-9]+)?)", re.IGNORECASE | re.MULTILINE)
_FEEDBACK_RE = re.compile(r"^\s*\**\s*FEEDBACK\s+([a-z0-9_]+)\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)


def parse_judge_response(raw: str, rubric: Rubric | None = None) -> AspectScores:
    """Extract and validate the score block; totals are recomputed, never trusted.

    A sub-criterion may be scored directly or through all of its leaf
    components (which then sum to it); a direct score wins when both appear.
    """
    if not raw or not raw.strip():
        raise MissingCriterion([s.id for s in (rubric or default_rubric()).sub_criteria()], raw or "")
    rubric = rubric or default_rubric()
    caps = rubric.cap_table()

    scored: dict[str, Decimal] = {}
    for match in _SCORE_RE.finditer(raw):
        criterion = match.group(1).lower()
        if criterion not in caps:
            continue  # totals or invented ids are ignored
        try:
            value = Decimal(match.group(2))
        except InvalidOperation:
            continue
        if value < 0 or value > caps[criterion]:
            raise ScoreOutOfRange(criterion, value, caps[criterion])
        scored[criterion] = value

    sub_scores: dict[str, Decimal] = {}
    missing: list[str] = []
    for sub in rubric.sub_criteria():
        if sub.id in scored:
            sub_scores[sub.id] = scored[sub.id]
        elif sub.components and all(c.id in scored for c in sub.components):
            sub_scores[sub.id] = sum((scored[c.id] for c in sub.components), Decimal(0))
        else:
            missing.append(sub.id)
    if missing:
        raise MissingCriterion(missing, raw)

    aspect_totals: dict[str, Decimal] = {}
    for aspect in rubric.aspects:
        aspect_totals[aspect.id] = sum(
            (sub_scores[s.id] for s in aspect.sub_criteria), Decimal(0)
        )
    grand_total = sum(aspect_totals.values(), Decimal(0))

    feedback = {}
    known_aspects = {a.id for a in rubric.aspects}
    for match in _FEEDBACK_RE.finditer(raw):
        aspect_id = match.group(1).lower()
        if aspect_id in known_aspects:
            feedback[aspect_id] = match.group(2).strip()

    return AspectScores(
        sub_scores=sub_scores,
        aspect_totals=aspect_totals,
        grand_total=grand_total,
        feedback=feedback,
    )


JUDGE_RETRY_SUFFIX = "Repeat the SCORE block exactly."


def judge(
    plan_text: str,
    task_title: str,
    client,
    model_id: str,
    params: InferenceParams | None = None,
    rubric: Rubric | None = None,
) -> tuple[AspectScores, Provenance]:
    """Build the prompt, query the judge backend, parse with one retry.

    ``client`` is a chat client (``chat(ChatRequest) -> ChatResponse``); a
    judge model distinct from the plan generator is recommended.
    """
    from .gateway import ChatRequest  # local import keeps module load light

    params = params or InferenceParams()
    rubric = rubric or default_rubric()
    prompt = build_judge_prompt(plan_text, task_title, rubric)

    request = ChatRequest(
        model_id=model_id,
        system_prompt=params.system_prompt,
        user_prompt=prompt.text,
        params=params,
    )
    response = client.chat(request)
    try:
        scores = parse_judge_response(response.text, rubric)
    except JudgeError:
        retry_text = f"{prompt.text}\n\n{JUDGE_RETRY_SUFFIX}"
        retry = ChatRequest(
            model_id=model_id,
            system_prompt=params.system_prompt,
            user_prompt=retry_text,
            params=params,
        )
        response = client.chat(retry)
        scores = parse_judge_response(response.text, rubric)

    provenance = Provenance(
        backend_id=response.backend_id,
        model_id=model_id,
        params=params,
        prompt_digest=prompt.digest,
        created_at=response.created_at,
    )
    return scores, provenance


def export_judge_rows(rows) -> str:
    """CSV "task_id,arm,aspect,score,total" rows from (task_id, arm, AspectScores)."""
    lines = ["task_id,arm,aspect,score,total"]
    for task_id, arm, scores in rows:
        for aspect_id, value in scores.aspect_totals.items():
            lines.append(f"{task_id},{arm},{aspect_id},{value},{scores.grand_total}")
    return "\n".join(lines) + "\n"


def feedback_text(scores: AspectScores) -> str:
    """Human-readable feedback file body for one judgment."""
    parts = []
    for aspect_id, total in scores.aspect_totals.items():
        parts.append(f"{aspect_id} ({total}):")
        parts.append(scores.feedback.get(aspect_id, "(no feedback returned)"))
        parts.append("")
    parts.append(f"grand total: {scores.grand_total}")
    return "\n".join(parts) + "\n"
