"""Run orchestration for the two arms.

The grounded arm walks vanilla -> captions -> fused captions -> alignment
-> videos; the baseline arm walks vanilla -> videos. Every stage persists
its artifact under workspace/{run_id}/{task_id}/ and a run-level ledger
tracks per-task stage status, so an interrupted run resumes by re-executing
only stages that are not Done. Task-level parallelism is bounded by the
configured concurrency limit; stages within a task run sequentially.
"""

from __future__ import annotations

import json
import logging
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .dataset import Manifest, resolve_caption_sources
from .gateway import (
    CaptionRequest,
    ChatRequest,
    Gateway,
    GatewayError,
    VideoJobRequest,
)
from .model import (
    CaptionTrack,
    FusedCaption,
    GoalPlan,
    GroundedPlan,
    InferenceParams,
    JobStatus,
    PlanArm,
    Provenance,
    TaskKind,
    TaskSpec,
    VanillaTextPlan,
    VideoPlanItem,
    deserialize,
    dumps_document,
    read_document,
    serialize,
    validate,
    validate_fused_sources,
    write_document,
)
from .parsing import ParseError, UnparsablePlan, parse_foc, parse_grounded, parse_vanilla
from .prompts import PromptTemplate, TemplateKind, render, text_digest

logger = logging.getLogger(__name__)

VANILLA_RETRY_SUFFIX = "Answer as a numbered list."
ALIGN_RETRY_SUFFIX = "Answer every step with Text:, Context:, and Visual: lines."


class PipelineError(Exception):
    pass


class NoCaptions(PipelineError):
    pass


class LedgerConflict(PipelineError):
    pass


class StageStatus(str, Enum):
    NOT_STARTED = "NotStarted"
    DONE = "Done"
    FAILED = "Failed"


@dataclass
class StageState:
    status: StageStatus = StageStatus.NOT_STARTED
    artifact: str | None = None
    error: str | None = None

    def to_doc(self) -> dict:
        return {"status": self.status.value, "artifact": self.artifact, "error": self.error}

    @classmethod
    def from_doc(cls, doc: dict) -> "StageState":
        return cls(
            status=StageStatus(doc.get("status", "NotStarted")),
            artifact=doc.get("artifact"),
            error=doc.get("error"),
        )


STAGES_BY_ARM = {
    PlanArm.VGTVP: ("vanilla", "captions", "foc", "aligned", "videos"),
    PlanArm.BASELINE: ("vanilla", "videos"),
}

#: Prerequisites that must be Done before a stage may be Done.
STAGE_PREREQS = {
    PlanArm.VGTVP: {
        "vanilla": (),
        "captions": (),
        "foc": ("captions",),
        "aligned": ("vanilla", "foc"),
        "videos": ("aligned",),
    },
    PlanArm.BASELINE: {"vanilla": (), "videos": ("vanilla",)},
}

_ARTIFACT_FILES = {
    "vanilla": "vanilla.json",
    "captions": "captions.json",
    "foc": "foc.json",
    "aligned": "aligned.json",
    "videos": "goal.json",
}


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    arm: PlanArm
    model_id: str
    params: InferenceParams
    task_ids: tuple[str, ...]
    concurrency_limit: int = 1
    alignment_kind: TemplateKind = TemplateKind.ALIGNMENT
    video_duration_hint_sec: float = 2.0
    video_seed: int = 0
    templates: tuple[PromptTemplate, ...] = ()

    def __post_init__(self):
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")
        if not self.task_ids:
            raise ValueError("at least one task id is required")

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "arm": self.arm.value,
            "model_id": self.model_id,
            "params": serialize(self.params),
            "task_ids": list(self.task_ids),
            "alignment_kind": self.alignment_kind.value,
            "video_duration_hint_sec": self.video_duration_hint_sec,
            "video_seed": self.video_seed,
            "templates": [
                {"kind": t.kind.value, "body": t.body, "version": t.version}
                for t in self.templates
            ],
        }


@dataclass
class RunState:
    run_id: str
    arm: PlanArm
    tasks: dict[str, dict[str, StageState]] = field(default_factory=dict)

    def stage(self, task_id: str, stage: str) -> StageState:
        return self.tasks.setdefault(task_id, {}).setdefault(stage, StageState())

    def to_doc(self) -> dict:
        return {
            "schema_version": "1",
            "run_id": self.run_id,
            "arm": self.arm.value,
            "tasks": {
                task_id: {name: state.to_doc() for name, state in stages.items()}
                for task_id, stages in self.tasks.items()
            },
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RunState":
        state = cls(run_id=doc["run_id"], arm=PlanArm(doc["arm"]))
        for task_id, stages in doc.get("tasks", {}).items():
            state.tasks[task_id] = {
                name: StageState.from_doc(entry) for name, entry in stages.items()
            }
        return state

    def check_monotone(self) -> None:
        prereqs = STAGE_PREREQS[self.arm]
        for task_id, stages in self.tasks.items():
            for name, state in stages.items():
                if state.status is not StageStatus.DONE:
                    continue
                for dependency in prereqs.get(name, ()):
                    upstream = stages.get(dependency)
                    if upstream is None or upstream.status is not StageStatus.DONE:
                        raise LedgerConflict(
                            f"{task_id}: stage {name} is Done but prerequisite "
                            f"{dependency} is not"
                        )


@dataclass(frozen=True)
class CaptionCollection:
    """Per-task caption bundle with its source attribution.

    For an unseen task the sources are its two related seen tasks, in
    manifest order; for a seen task, the task itself.
    """

    task_id: str
    source_task_ids: tuple[str, ...]
    tracks: tuple[CaptionTrack, ...]

    def to_doc(self) -> dict:
        return {
            "schema_version": "1",
            "type": "caption_collection",
            "task_id": self.task_id,
            "source_task_ids": list(self.source_task_ids),
            "tracks": [serialize(t) for t in self.tracks],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CaptionCollection":
        return cls(
            task_id=doc["task_id"],
            source_task_ids=tuple(doc["source_task_ids"]),
            tracks=tuple(deserialize(t, CaptionTrack) for t in doc["tracks"]),
        )


class Pipeline:
    def __init__(self, gateway: Gateway, manifest: Manifest, workspace: Path):
        self.gateway = gateway
        self.manifest = manifest
        self.workspace = Path(workspace)
        self._ledger_lock = threading.Lock()

    # -- paths ---------------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.workspace / run_id

    def _ledger_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "ledger.json"

    def artifact_path(self, run_id: str, task_id: str, stage: str) -> Path:
        return self.run_dir(run_id) / task_id / _ARTIFACT_FILES[stage]

    # -- chat plumbing ---------------------------------------------------------

    def _chat(self, prompt_text: str, config: RunConfig, template_version: str) -> tuple[str, Provenance]:
        request = ChatRequest(
            model_id=config.model_id,
            system_prompt=config.params.system_prompt,
            user_prompt=prompt_text,
            params=config.params,
            template_version=template_version,
        )
        response = self.gateway.chat.chat(request)
        provenance = Provenance(
            backend_id=response.backend_id,
            model_id=config.model_id,
            params=config.params,
            prompt_digest=text_digest(prompt_text),
            created_at=response.created_at,
        )
        return response.text, provenance

    def _chat_parse_with_retry(self, prompt_text, config, template_version, parse, retry_suffix):
        raw, provenance = self._chat(prompt_text, config, template_version)
        try:
            return parse(raw), provenance
        except ParseError:
            retry_text = f"{prompt_text}\n\n{retry_suffix}"
            raw, provenance = self._chat(retry_text, config, template_version)
            return parse(raw), provenance

    # -- stages ----------------------------------------------------------------

    def generate_vanilla_plan(self, task: TaskSpec, config: RunConfig) -> VanillaTextPlan:
        prompt = render(TemplateKind.VANILLA, task, templates=config.templates)
        (steps, _diag), provenance = self._chat_parse_with_retry(
            prompt.text, config, prompt.template_version, parse_vanilla, VANILLA_RETRY_SUFFIX
        )
        plan = VanillaTextPlan(task_id=task.id, steps=tuple(steps), provenance=provenance)
        self._require_valid(plan, "vanilla plan")
        return plan

    def collect_captions(self, task: TaskSpec, config: RunConfig) -> CaptionCollection:
        if task.kind is TaskKind.SEEN:
            sources = [(task.id, task.video_refs)]
        else:
            sources = resolve_caption_sources(task, self.manifest)

        tracks: list[CaptionTrack] = []
        index = 0
        for source_id, refs in sources:
            for ref in refs:
                try:
                    result = self.gateway.captioner.caption(
                        CaptionRequest(ref.uri), video_index=index
                    )
                    tracks.append(result.track)
                except GatewayError as err:
                    logger.warning("captioning %s (%s) failed: %s", ref.uri, source_id, err)
                index += 1
        if not tracks:
            raise NoCaptions(f"no caption tracks collected for task {task.id!r}")
        return CaptionCollection(
            task_id=task.id,
            source_task_ids=tuple(source_id for source_id, _ in sources),
            tracks=tuple(tracks),
        )

    def fuse_captions(self, task: TaskSpec, tracks, config: RunConfig) -> FusedCaption:
        tracks = tuple(tracks)
        if not tracks:
            raise NoCaptions(f"fuse_captions needs at least one track for {task.id!r}")
        prompt = render(TemplateKind.DESCRIPTION, task, captions=tracks, templates=config.templates)
        raw, provenance = self._chat(prompt.text, config, prompt.template_version)
        steps, _diag = parse_foc(raw)
        fused = FusedCaption(task_id=task.id, steps=tuple(steps), provenance=provenance)
        self._require_valid(fused, "fused captions")
        source_violations = validate_fused_sources(fused, tracks)
        if source_violations:
            raise PipelineError(f"fused caption sources do not resolve: {source_violations}")
        return fused

    def align_plan(
        self, task: TaskSpec, vtp: VanillaTextPlan, foc: FusedCaption, config: RunConfig
    ) -> GroundedPlan:
        if vtp is None or foc is None:
            raise PipelineError("align_plan requires both the vanilla plan and fused captions")
        prompt = render(
            config.alignment_kind, task, captions=foc, vtp=vtp, templates=config.templates
        )
        (steps, _diag), provenance = self._chat_parse_with_retry(
            prompt.text, config, prompt.template_version, parse_grounded, ALIGN_RETRY_SUFFIX
        )
        plan = GroundedPlan(task_id=task.id, steps=tuple(steps), provenance=provenance)
        self._require_valid(plan, "grounded plan")
        return plan

    @staticmethod
    def baseline_video_prompt(text: str, context: str) -> str:
        if text.endswith((".", "!", "?")):
            return f"{text} {context}"
        return f"{text}. {context}"

    def generate_video_plan(self, text_plan, config: RunConfig) -> list[VideoPlanItem]:
        if not text_plan.steps:
            raise PipelineError("cannot generate videos for an empty plan")
        items: list[VideoPlanItem] = []
        for step in text_plan.steps:
            if isinstance(text_plan, GroundedPlan):
                prompt = step.visual
            else:
                prompt = self.baseline_video_prompt(step.text, step.context)
            request = VideoJobRequest(
                prompt=prompt,
                duration_hint_sec=config.video_duration_hint_sec,
                seed=config.video_seed,
            )
            try:
                job_id = self.gateway.video.submit(request)
                status = self.gateway.video.run_to_completion(request)
                items.append(VideoPlanItem(
                    step_index=step.index,
                    prompt_used=prompt,
                    job_id=job_id,
                    status=status.status,
                    artifact_uri=status.artifact_uri,
                ))
            except GatewayError as err:
                logger.warning("video generation for step %d failed: %s", step.index, err)
                items.append(VideoPlanItem(
                    step_index=step.index,
                    prompt_used=prompt,
                    job_id="",
                    status=JobStatus.FAILED,
                ))
        return items

    # -- ledger ------------------------------------------------------------------

    def _write_ledger(self, state: RunState) -> None:
        path = self._ledger_path(state.run_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = json.dumps(state.to_doc(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with open(fd, "w", encoding="utf-8") as handle:
            handle.write(body)
        Path(tmp).replace(path)

    def _load_state(self, config: RunConfig) -> RunState:
        path = self._ledger_path(config.run_id)
        if path.exists():
            state = RunState.from_doc(json.loads(path.read_text(encoding="utf-8")))
            if state.arm is not config.arm:
                raise LedgerConflict(
                    f"run {config.run_id!r} was started with arm {state.arm.value}"
                )
            state.check_monotone()
            return state
        return RunState(run_id=config.run_id, arm=config.arm)

    def _check_config_reuse(self, config: RunConfig) -> None:
        path = self.run_dir(config.run_id) / "config.json"
        doc = config.to_doc()
        if path.exists():
            existing = json.loads(path.read_text(encoding="utf-8"))
            if existing != doc:
                raise LedgerConflict(
                    f"run id {config.run_id!r} already exists with a different configuration"
                )
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n")

    @staticmethod
    def _require_valid(entity, label: str) -> None:
        violations = validate(entity)
        if violations:
            raise PipelineError(f"invalid {label}: {violations}")

    def stage_plan(self, config: RunConfig) -> list[tuple[str, tuple[str, ...]]]:
        return [(task_id, STAGES_BY_ARM[config.arm]) for task_id in config.task_ids]

    def run_stage(self, config: RunConfig, task_id: str, stage: str):
        """Execute exactly one stage, loading its prerequisites from the ledger."""
        if stage not in STAGES_BY_ARM[config.arm]:
            raise PipelineError(f"stage {stage!r} does not exist in the {config.arm.value} arm")
        task = self.manifest.task(task_id)
        self._check_config_reuse(config)
        state = self._load_state(config)

        artifacts: dict[str, object] = {}
        for dependency in STAGE_PREREQS[config.arm][stage]:
            entry = state.stage(task_id, dependency)
            path = self.artifact_path(config.run_id, task_id, dependency)
            if entry.status is not StageStatus.DONE or not path.exists():
                raise PipelineError(
                    f"stage {stage!r} needs {dependency!r} first; run that stage for {task_id!r}"
                )
            artifacts[dependency] = self._load_artifact(dependency, path)

        artifact = self._execute_stage(stage, task, config, artifacts)
        path = self.artifact_path(config.run_id, task_id, stage)
        self._persist_artifact(stage, path, artifact)
        self._mark(
            state, task_id, stage,
            status=StageStatus.DONE,
            artifact=str(path.relative_to(self.workspace)),
            error=None,
        )
        return artifact

    # -- run ------------------------------------------------------------------------

    def run(self, config: RunConfig, stop_after_stage: str | None = None) -> RunState:
        for task_id in config.task_ids:
            self.manifest.task(task_id)  # fail fast on unknown ids
        self._check_config_reuse(config)
        state = self._load_state(config)

        def submit(task_id: str):
            self._run_task(task_id, config, state, stop_after_stage)

        if config.concurrency_limit == 1:
            for task_id in config.task_ids:
                submit(task_id)
        else:
            with ThreadPoolExecutor(max_workers=config.concurrency_limit) as pool:
                list(pool.map(submit, config.task_ids))
        return state

    def _mark(self, state: RunState, task_id: str, stage: str, **fields) -> None:
        with self._ledger_lock:
            entry = state.stage(task_id, stage)
            for name, value in fields.items():
                setattr(entry, name, value)
            self._write_ledger(state)

    def _run_task(
        self,
        task_id: str,
        config: RunConfig,
        state: RunState,
        stop_after_stage: str | None,
    ) -> None:
        task = self.manifest.task(task_id)
        artifacts: dict[str, object] = {}

        for stage in STAGES_BY_ARM[config.arm]:
            entry = state.stage(task_id, stage)
            path = self.artifact_path(config.run_id, task_id, stage)
            if entry.status is StageStatus.DONE and path.exists():
                artifacts[stage] = self._load_artifact(stage, path)
                continue
            try:
                artifact = self._execute_stage(stage, task, config, artifacts)
            except Exception as err:  # per-task isolation: record and stop this task
                logger.warning("task %s stage %s failed: %s", task_id, stage, err)
                self._mark(state, task_id, stage, status=StageStatus.FAILED, error=str(err))
                return
            artifacts[stage] = artifact
            self._persist_artifact(stage, path, artifact)
            self._mark(
                state, task_id, stage,
                status=StageStatus.DONE,
                artifact=str(path.relative_to(self.workspace)),
                error=None,
            )
            if stop_after_stage is not None and stage == stop_after_stage:
                return

    def _execute_stage(self, stage: str, task: TaskSpec, config: RunConfig, artifacts: dict):
        if stage == "vanilla":
            return self.generate_vanilla_plan(task, config)
        if stage == "captions":
            return self.collect_captions(task, config)
        if stage == "foc":
            return self.fuse_captions(task, artifacts["captions"].tracks, config)
        if stage == "aligned":
            return self.align_plan(task, artifacts["vanilla"], artifacts["foc"], config)
        if stage == "videos":
            text_plan = artifacts["aligned"] if config.arm is PlanArm.VGTVP else artifacts["vanilla"]
            video_plan = self.generate_video_plan(text_plan, config)
            goal = GoalPlan(
                task_id=task.id,
                arm=config.arm,
                text_plan=text_plan,
                video_plan=tuple(video_plan),
            )
            self._require_valid(goal, "goal plan")
            return goal
        raise PipelineError(f"unknown stage {stage!r}")

    def _persist_artifact(self, stage: str, path: Path, artifact) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        if stage == "captions":
            body = json.dumps(artifact.to_doc(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(body, encoding="utf-8")
            tmp.replace(path)
        else:
            write_document(artifact, path)

    def _load_artifact(self, stage: str, path: Path):
        if stage == "captions":
            return CaptionCollection.from_doc(json.loads(path.read_text(encoding="utf-8")))
        expected = {
            "vanilla": VanillaTextPlan,
            "foc": FusedCaption,
            "aligned": GroundedPlan,
            "videos": GoalPlan,
        }[stage]
        return read_document(path, expected)


def load_goal_plan(pipeline: Pipeline, run_id: str, task_id: str) -> GoalPlan:
    return read_document(pipeline.artifact_path(run_id, task_id, "videos"), GoalPlan)


def goal_plan_bytes(pipeline: Pipeline, run_id: str, task_id: str) -> bytes:
    return pipeline.artifact_path(run_id, task_id, "videos").read_bytes()


def goal_plan_document(plan: GoalPlan) -> str:
    return dumps_document(plan)
