"""Domain types shared by the planning pipeline and the evaluation harness.

Everything here is an immutable value: construction, validation, and
(de)serialization only. Documents use schema_version "1" with snake_case
field names; unknown extra fields are accepted with a warning so newer
writers stay readable.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, Callable

SCHEMA_VERSION = "1"


class Domain(str, Enum):
    BREAKFAST = "Breakfast"
    DINNER = "Dinner"
    DRINK = "Drink"
    HOBBY_CRAFTS = "HobbyCrafts"
    HOME_GARAGE = "HomeGarage"


class TaskKind(str, Enum):
    SEEN = "Seen"
    UNSEEN = "Unseen"


class JobStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


class PlanArm(str, Enum):
    VGTVP = "VGTVP"
    BASELINE = "Baseline"


class SchemaError(ValueError):
    """Malformed document; ``path`` points at the first offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ForwardCompatWarning(UserWarning):
    """Unknown extra field in a document; accepted and ignored."""


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str


ValidationReport = list  # list[Violation]; empty when valid


@dataclass(frozen=True)
class InferenceParams:
    temperature: float = 0.8
    top_k: int = 40
    top_p: float = 0.095
    min_p: float = 0.05
    n_batch: int = 512
    n_ctx: int = 4096
    system_prompt: str = "You are a helpful AI assistant."


# Literal defaults above; top_p 0.095 is anomalously low (a likely
# transposition of 0.95 in the source configuration) but kept as-is.
# See README "Sampling defaults".
DEFAULT_INFERENCE_PARAMS = InferenceParams()


@dataclass(frozen=True)
class VideoRef:
    uri: str
    duration_sec: float | None = None


@dataclass(frozen=True)
class TaskSpec:
    id: str
    title: str
    domain: Domain
    kind: TaskKind
    video_refs: tuple[VideoRef, ...] = ()
    related_seen: tuple[str, ...] = ()


@dataclass(frozen=True)
class Provenance:
    backend_id: str
    model_id: str
    params: InferenceParams
    prompt_digest: str
    created_at: str


@dataclass(frozen=True)
class VanillaStep:
    index: int
    text: str
    context: str


@dataclass(frozen=True)
class VanillaTextPlan:
    task_id: str
    steps: tuple[VanillaStep, ...]
    provenance: Provenance


@dataclass(frozen=True)
class CaptionSegment:
    video_index: int
    start_sec: float
    end_sec: float
    text: str


@dataclass(frozen=True)
class CaptionTrack:
    video_index: int
    segments: tuple[CaptionSegment, ...]


@dataclass(frozen=True)
class FusedStep:
    sentence: str
    sources: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class FusedCaption:
    task_id: str
    steps: tuple[FusedStep, ...]
    provenance: Provenance


@dataclass(frozen=True)
class GroundedStep:
    index: int
    text: str
    context: str
    visual: str


@dataclass(frozen=True)
class GroundedPlan:
    task_id: str
    steps: tuple[GroundedStep, ...]
    provenance: Provenance


@dataclass(frozen=True)
class VideoPlanItem:
    step_index: int
    prompt_used: str
    job_id: str
    status: JobStatus
    artifact_uri: str | None = None


@dataclass(frozen=True)
class GoalPlan:
    task_id: str
    arm: PlanArm
    text_plan: GroundedPlan | VanillaTextPlan
    video_plan: tuple[VideoPlanItem, ...]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _v(code: str, path: str, message: str) -> Violation:
    return Violation(code=code, path=path, message=message)


def _validate_video_ref(ref: VideoRef, path: str) -> list[Violation]:
    out = []
    if not ref.uri:
        out.append(_v("uri_empty", f"{path}/uri", "video uri must be nonempty"))
    if ref.duration_sec is not None and ref.duration_sec <= 0:
        out.append(_v("duration_nonpositive", f"{path}/duration_sec",
                      "duration_sec must be > 0 when present"))
    return out


def _validate_task_spec(task: TaskSpec, path: str = "") -> list[Violation]:
    out = []
    if not task.id:
        out.append(_v("id_empty", f"{path}/id", "task id must be nonempty"))
    if not task.title:
        out.append(_v("title_empty", f"{path}/title", "task title must be nonempty"))
    for i, ref in enumerate(task.video_refs):
        out.extend(_validate_video_ref(ref, f"{path}/video_refs/{i}"))
    if task.kind is TaskKind.SEEN:
        if not 7 <= len(task.video_refs) <= 10:
            out.append(_v("video_count_out_of_range", f"{path}/video_refs",
                          f"seen task must carry 7..10 video refs, has {len(task.video_refs)}"))
        if task.related_seen:
            out.append(_v("related_seen_forbidden", f"{path}/related_seen",
                          "seen task must not reference related seen tasks"))
    else:
        if task.video_refs:
            out.append(_v("video_refs_forbidden", f"{path}/video_refs",
                          "unseen task must not carry video refs"))
        if len(task.related_seen) != 2:
            out.append(_v("related_seen_cardinality", f"{path}/related_seen",
                          f"unseen task must reference exactly 2 seen tasks, has {len(task.related_seen)}"))
    return out


def _validate_inference_params(p: InferenceParams, path: str = "") -> list[Violation]:
    out = []
    if p.temperature < 0:
        out.append(_v("temperature_negative", f"{path}/temperature", "temperature must be >= 0"))
    if p.top_k < 1:
        out.append(_v("top_k_invalid", f"{path}/top_k", "top_k must be >= 1"))
    if not 0 < p.top_p <= 1:
        out.append(_v("top_p_out_of_range", f"{path}/top_p", "top_p must be in (0, 1]"))
    if not 0 <= p.min_p < 1:
        out.append(_v("min_p_out_of_range", f"{path}/min_p", "min_p must be in [0, 1)"))
    if p.n_batch < 1:
        out.append(_v("n_batch_invalid", f"{path}/n_batch", "n_batch must be >= 1"))
    if p.n_ctx <= 0:
        out.append(_v("n_ctx_invalid", f"{path}/n_ctx", "n_ctx must be > 0"))
    return out


def _validate_provenance(p: Provenance, path: str = "") -> list[Violation]:
    out = []
    if not p.prompt_digest:
        out.append(_v("prompt_digest_empty", f"{path}/prompt_digest",
                      "prompt_digest must be nonempty"))
    out.extend(_validate_inference_params(p.params, f"{path}/params"))
    return out


def _validate_indexed_steps(steps, path: str, kind: str) -> list[Violation]:
    out = []
    for i, step in enumerate(steps):
        if step.index != i + 1:
            out.append(_v("indices_not_contiguous", f"{path}/{i}/index",
                          f"{kind} step indices must run 1..n, found {step.index} at position {i}"))
    return out


def _validate_vanilla_plan(plan: VanillaTextPlan, path: str = "") -> list[Violation]:
    out = []
    if not plan.steps:
        out.append(_v("steps_empty", f"{path}/steps", "plan must carry at least one step"))
    for i, step in enumerate(plan.steps):
        if not step.text:
            out.append(_v("text_empty", f"{path}/steps/{i}/text", "step text must be nonempty"))
    out.extend(_validate_indexed_steps(plan.steps, f"{path}/steps", "vanilla"))
    out.extend(_validate_provenance(plan.provenance, f"{path}/provenance"))
    return out


def _validate_caption_segment(seg: CaptionSegment, path: str = "") -> list[Violation]:
    out = []
    if seg.video_index < 0:
        out.append(_v("video_index_negative", f"{path}/video_index", "video_index must be >= 0"))
    if not (0 <= seg.start_sec < seg.end_sec):
        out.append(_v("segment_times_invalid", f"{path}/start_sec",
                      f"need 0 <= start < end, got {seg.start_sec}..{seg.end_sec}"))
    if not seg.text:
        out.append(_v("text_empty", f"{path}/text", "caption text must be nonempty"))
    return out


def _validate_caption_track(track: CaptionTrack, path: str = "") -> list[Violation]:
    out = []
    starts = [s.start_sec for s in track.segments]
    if starts != sorted(starts):
        out.append(_v("segments_unsorted", f"{path}/segments",
                      "segments must be sorted ascending by start_sec"))
    for i, seg in enumerate(track.segments):
        out.extend(_validate_caption_segment(seg, f"{path}/segments/{i}"))
    return out


def _validate_fused_caption(fused: FusedCaption, path: str = "") -> list[Violation]:
    out = []
    if not fused.steps:
        out.append(_v("steps_empty", f"{path}/steps", "fused caption must carry at least one step"))
    for i, step in enumerate(fused.steps):
        if not step.sentence:
            out.append(_v("sentence_empty", f"{path}/steps/{i}/sentence",
                          "fused sentence must be nonempty"))
    out.extend(_validate_provenance(fused.provenance, f"{path}/provenance"))
    return out


def validate_fused_sources(fused: FusedCaption, tracks) -> list[Violation]:
    """Check that every (video_index, segment_index) source resolves into *tracks*."""
    by_video = {t.video_index: t for t in tracks}
    out = []
    for i, step in enumerate(fused.steps):
        for j, (vi, si) in enumerate(step.sources):
            track = by_video.get(vi)
            if track is None or not 0 <= si < len(track.segments):
                out.append(_v("source_unresolved", f"/steps/{i}/sources/{j}",
                              f"source ({vi}, {si}) does not resolve to a known segment"))
    return out


def _validate_grounded_plan(plan: GroundedPlan, path: str = "") -> list[Violation]:
    out = []
    if not plan.steps:
        out.append(_v("steps_empty", f"{path}/steps", "plan must carry at least one step"))
    for i, step in enumerate(plan.steps):
        for name in ("text", "context", "visual"):
            if not getattr(step, name):
                out.append(_v(f"{name}_empty", f"{path}/steps/{i}/{name}",
                              f"grounded step {name} must be nonempty"))
    out.extend(_validate_indexed_steps(plan.steps, f"{path}/steps", "grounded"))
    out.extend(_validate_provenance(plan.provenance, f"{path}/provenance"))
    return out


def _validate_video_plan_item(item: VideoPlanItem, path: str = "") -> list[Violation]:
    out = []
    if (item.status is JobStatus.DONE) != (item.artifact_uri is not None):
        out.append(_v("artifact_uri_mismatch", f"{path}/artifact_uri",
                      "artifact_uri must be present exactly when status is Done"))
    if not item.prompt_used:
        out.append(_v("prompt_empty", f"{path}/prompt_used", "prompt_used must be nonempty"))
    return out


def _validate_goal_plan(plan: GoalPlan, path: str = "") -> list[Violation]:
    out = []
    expected_type = GroundedPlan if plan.arm is PlanArm.VGTVP else VanillaTextPlan
    if not isinstance(plan.text_plan, expected_type):
        out.append(_v("arm_plan_type_mismatch", f"{path}/text_plan",
                      f"{plan.arm.value} arm requires a {expected_type.__name__}"))
    n = len(plan.text_plan.steps)
    if len(plan.video_plan) != n:
        out.append(_v("step_parity", f"{path}/video_plan",
                      f"video plan has {len(plan.video_plan)} items for {n} text steps"))
    for i, item in enumerate(plan.video_plan):
        if not 1 <= item.step_index <= n:
            out.append(_v("step_index_unresolved", f"{path}/video_plan/{i}/step_index",
                          f"step_index {item.step_index} outside 1..{n}"))
        out.extend(_validate_video_plan_item(item, f"{path}/video_plan/{i}"))
    out.extend(validate(plan.text_plan))
    return out


_VALIDATORS: dict[type, Callable[[Any], list[Violation]]] = {
    VideoRef: lambda e: _validate_video_ref(e, ""),
    TaskSpec: _validate_task_spec,
    InferenceParams: _validate_inference_params,
    Provenance: _validate_provenance,
    VanillaStep: lambda e: [] if e.text else [_v("text_empty", "/text", "step text must be nonempty")],
    VanillaTextPlan: _validate_vanilla_plan,
    CaptionSegment: _validate_caption_segment,
    CaptionTrack: _validate_caption_track,
    FusedCaption: _validate_fused_caption,
    GroundedPlan: _validate_grounded_plan,
    VideoPlanItem: _validate_video_plan_item,
    GoalPlan: _validate_goal_plan,
}


def validate(entity) -> list[Violation]:
    """Return every violated invariant of *entity*; empty list when valid."""
    validator = _VALIDATORS.get(type(entity))
    if validator is None:
        raise TypeError(f"no validator for {type(entity).__name__}")
    return validator(entity)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_TYPE_TAGS: dict[type, str] = {
    VideoRef: "video_ref",
    TaskSpec: "task_spec",
    InferenceParams: "inference_params",
    Provenance: "provenance",
    VanillaStep: "vanilla_step",
    VanillaTextPlan: "vanilla_text_plan",
    CaptionSegment: "caption_segment",
    CaptionTrack: "caption_track",
    FusedStep: "fused_step",
    FusedCaption: "fused_caption",
    GroundedStep: "grounded_step",
    GroundedPlan: "grounded_plan",
    VideoPlanItem: "video_plan_item",
    GoalPlan: "goal_plan",
}
_TAG_TYPES = {tag: cls for cls, tag in _TYPE_TAGS.items()}


def _encode(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple(_TYPE_TAGS)):
        out = {}
        for f in fields(value):
            out[f.name] = _encode(getattr(value, f.name))
        if isinstance(value, GoalPlan):
            # text_plan type is ambiguous across arms; tag it for readers
            out["text_plan"] = serialize(value.text_plan)
        return out
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def serialize(entity) -> dict:
    """Encode *entity* into a plain document (dict) with schema metadata."""
    tag = _TYPE_TAGS.get(type(entity))
    if tag is None:
        raise TypeError(f"no serializer for {type(entity).__name__}")
    doc = {"schema_version": SCHEMA_VERSION, "type": tag}
    doc.update(_encode(entity))
    return doc


def _expect(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}/{key}", "missing required field")
    return doc[key]


def _field_str(doc, key, path, optional=False):
    if optional and doc.get(key) is None:
        return None
    value = _expect(doc, key, path)
    if not isinstance(value, str):
        raise SchemaError(f"{path}/{key}", f"expected string, got {type(value).__name__}")
    return value


def _field_num(doc, key, path, optional=False):
    if optional and doc.get(key) is None:
        return None
    value = _expect(doc, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}/{key}", f"expected number, got {type(value).__name__}")
    return value


def _field_int(doc, key, path):
    value = _expect(doc, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}/{key}", f"expected integer, got {type(value).__name__}")
    return value


def _field_enum(doc, key, path, enum_cls):
    raw = _field_str(doc, key, path)
    try:
        return enum_cls(raw)
    except ValueError:
        good = ", ".join(e.value for e in enum_cls)
        raise SchemaError(f"{path}/{key}", f"{raw!r} is not one of: {good}") from None


def _field_list(doc, key, path, default_empty=False):
    if default_empty and key not in doc:
        return []
    value = _expect(doc, key, path)
    if not isinstance(value, list):
        raise SchemaError(f"{path}/{key}", f"expected array, got {type(value).__name__}")
    return value


def _field_doc(doc, key, path):
    value = _expect(doc, key, path)
    if not isinstance(value, dict):
        raise SchemaError(f"{path}/{key}", f"expected object, got {type(value).__name__}")
    return value


def _warn_extras(doc: dict, known: set, path: str):
    for key in doc:
        if key not in known and key not in ("schema_version", "type"):
            warnings.warn(
                f"ignoring unknown field {path}/{key} (forward compatibility)",
                ForwardCompatWarning,
                stacklevel=3,
            )


def _decode_video_ref(doc, path):
    _warn_extras(doc, {"uri", "duration_sec"}, path)
    return VideoRef(
        uri=_field_str(doc, "uri", path),
        duration_sec=_field_num(doc, "duration_sec", path, optional=True),
    )


def _decode_task_spec(doc, path):
    _warn_extras(doc, {"id", "title", "domain", "kind", "video_refs", "related_seen"}, path)
    refs = _field_list(doc, "video_refs", path, default_empty=True)
    related = _field_list(doc, "related_seen", path, default_empty=True)
    for i, r in enumerate(related):
        if not isinstance(r, str):
            raise SchemaError(f"{path}/related_seen/{i}", "expected string task id")
    return TaskSpec(
        id=_field_str(doc, "id", path),
        title=_field_str(doc, "title", path),
        domain=_field_enum(doc, "domain", path, Domain),
        kind=_field_enum(doc, "kind", path, TaskKind),
        video_refs=tuple(
            _decode_video_ref(_as_doc(r, f"{path}/video_refs/{i}"), f"{path}/video_refs/{i}")
            for i, r in enumerate(refs)
        ),
        related_seen=tuple(related),
    )


def _as_doc(value, path):
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected object, got {type(value).__name__}")
    return value


def _decode_inference_params(doc, path):
    known = {"temperature", "top_k", "top_p", "min_p", "n_batch", "n_ctx", "system_prompt"}
    _warn_extras(doc, known, path)
    return InferenceParams(
        temperature=_field_num(doc, "temperature", path),
        top_k=_field_int(doc, "top_k", path),
        top_p=_field_num(doc, "top_p", path),
        min_p=_field_num(doc, "min_p", path),
        n_batch=_field_int(doc, "n_batch", path),
        n_ctx=_field_int(doc, "n_ctx", path),
        system_prompt=_field_str(doc, "system_prompt", path),
    )


def _decode_provenance(doc, path):
    _warn_extras(doc, {"backend_id", "model_id", "params", "prompt_digest", "created_at"}, path)
    return Provenance(
        backend_id=_field_str(doc, "backend_id", path),
        model_id=_field_str(doc, "model_id", path),
        params=_decode_inference_params(_field_doc(doc, "params", path), f"{path}/params"),
        prompt_digest=_field_str(doc, "prompt_digest", path),
        created_at=_field_str(doc, "created_at", path),
    )


def _decode_vanilla_step(doc, path):
    _warn_extras(doc, {"index", "text", "context"}, path)
    return VanillaStep(
        index=_field_int(doc, "index", path),
        text=_field_str(doc, "text", path),
        context=_field_str(doc, "context", path),
    )


def _decode_vanilla_plan(doc, path):
    _warn_extras(doc, {"task_id", "steps", "provenance"}, path)
    steps = _field_list(doc, "steps", path)
    return VanillaTextPlan(
        task_id=_field_str(doc, "task_id", path),
        steps=tuple(
            _decode_vanilla_step(_as_doc(s, f"{path}/steps/{i}"), f"{path}/steps/{i}")
            for i, s in enumerate(steps)
        ),
        provenance=_decode_provenance(_field_doc(doc, "provenance", path), f"{path}/provenance"),
    )


def _decode_caption_segment(doc, path):
    _warn_extras(doc, {"video_index", "start_sec", "end_sec", "text"}, path)
    return CaptionSegment(
        video_index=_field_int(doc, "video_index", path),
        start_sec=_field_num(doc, "start_sec", path),
        end_sec=_field_num(doc, "end_sec", path),
        text=_field_str(doc, "text", path),
    )


def _decode_caption_track(doc, path):
    _warn_extras(doc, {"video_index", "segments"}, path)
    segs = _field_list(doc, "segments", path)
    return CaptionTrack(
        video_index=_field_int(doc, "video_index", path),
        segments=tuple(
            _decode_caption_segment(_as_doc(s, f"{path}/segments/{i}"), f"{path}/segments/{i}")
            for i, s in enumerate(segs)
        ),
    )


def _decode_fused_step(doc, path):
    _warn_extras(doc, {"sentence", "sources"}, path)
    sources = _field_list(doc, "sources", path, default_empty=True)
    decoded = []
    for i, pair in enumerate(sources):
        if not isinstance(pair, list) or len(pair) != 2 or not all(isinstance(x, int) for x in pair):
            raise SchemaError(f"{path}/sources/{i}", "expected [video_index, segment_index]")
        decoded.append((pair[0], pair[1]))
    return FusedStep(sentence=_field_str(doc, "sentence", path), sources=tuple(decoded))


def _decode_fused_caption(doc, path):
    _warn_extras(doc, {"task_id", "steps", "provenance"}, path)
    steps = _field_list(doc, "steps", path)
    return FusedCaption(
        task_id=_field_str(doc, "task_id", path),
        steps=tuple(
            _decode_fused_step(_as_doc(s, f"{path}/steps/{i}"), f"{path}/steps/{i}")
            for i, s in enumerate(steps)
        ),
        provenance=_decode_provenance(_field_doc(doc, "provenance", path), f"{path}/provenance"),
    )


def _decode_grounded_step(doc, path):
    _warn_extras(doc, {"index", "text", "context", "visual"}, path)
    return GroundedStep(
        index=_field_int(doc, "index", path),
        text=_field_str(doc, "text", path),
        context=_field_str(doc, "context", path),
        visual=_field_str(doc, "visual", path),
    )


def _decode_grounded_plan(doc, path):
    _warn_extras(doc, {"task_id", "steps", "provenance"}, path)
    steps = _field_list(doc, "steps", path)
    return GroundedPlan(
        task_id=_field_str(doc, "task_id", path),
        steps=tuple(
            _decode_grounded_step(_as_doc(s, f"{path}/steps/{i}"), f"{path}/steps/{i}")
            for i, s in enumerate(steps)
        ),
        provenance=_decode_provenance(_field_doc(doc, "provenance", path), f"{path}/provenance"),
    )


def _decode_video_plan_item(doc, path):
    _warn_extras(doc, {"step_index", "prompt_used", "job_id", "status", "artifact_uri"}, path)
    return VideoPlanItem(
        step_index=_field_int(doc, "step_index", path),
        prompt_used=_field_str(doc, "prompt_used", path),
        job_id=_field_str(doc, "job_id", path),
        status=_field_enum(doc, "status", path, JobStatus),
        artifact_uri=_field_str(doc, "artifact_uri", path, optional=True),
    )


def _decode_goal_plan(doc, path):
    _warn_extras(doc, {"task_id", "arm", "text_plan", "video_plan"}, path)
    task_id = _field_str(doc, "task_id", path)
    arm = _field_enum(doc, "arm", path, PlanArm)
    plan_doc = _field_doc(doc, "text_plan", path)
    if arm is PlanArm.VGTVP:
        text_plan = _decode_grounded_plan(plan_doc, f"{path}/text_plan")
    else:
        text_plan = _decode_vanilla_plan(plan_doc, f"{path}/text_plan")
    items = _field_list(doc, "video_plan", path)
    return GoalPlan(
        task_id=task_id,
        arm=arm,
        text_plan=text_plan,
        video_plan=tuple(
            _decode_video_plan_item(_as_doc(v, f"{path}/video_plan/{i}"), f"{path}/video_plan/{i}")
            for i, v in enumerate(items)
        ),
    )


_DECODERS: dict[str, Callable[[dict, str], Any]] = {
    "video_ref": _decode_video_ref,
    "task_spec": _decode_task_spec,
    "inference_params": _decode_inference_params,
    "provenance": _decode_provenance,
    "vanilla_step": _decode_vanilla_step,
    "vanilla_text_plan": _decode_vanilla_plan,
    "caption_segment": _decode_caption_segment,
    "caption_track": _decode_caption_track,
    "fused_step": _decode_fused_step,
    "fused_caption": _decode_fused_caption,
    "grounded_step": _decode_grounded_step,
    "grounded_plan": _decode_grounded_plan,
    "video_plan_item": _decode_video_plan_item,
    "goal_plan": _decode_goal_plan,
}


def deserialize(doc: dict, expected_type: type | None = None):
    """Decode a document produced by :func:`serialize`.

    ``expected_type`` pins the target type; otherwise the document's own
    ``type`` tag decides. Raises :class:`SchemaError` on the first
    malformed field.
    """
    if not isinstance(doc, dict):
        raise SchemaError("/", f"expected object, got {type(doc).__name__}")
    version = doc.get("schema_version")
    if version is not None and version != SCHEMA_VERSION:
        raise SchemaError("/schema_version", f"unsupported schema version {version!r}")
    if expected_type is not None:
        tag = _TYPE_TAGS.get(expected_type)
        if tag is None:
            raise TypeError(f"no decoder for {expected_type.__name__}")
    else:
        tag = doc.get("type")
        if tag not in _DECODERS:
            raise SchemaError("/type", f"unknown or missing type tag {tag!r}")
    return _DECODERS[tag](doc, "")


def dumps_document(entity) -> str:
    """Canonical UTF-8 text form: sorted keys, two-space indent, LF."""
    return json.dumps(serialize(entity), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_document(entity, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dumps_document(entity), encoding="utf-8")
    tmp.replace(path)


def read_document(path: Path, expected_type: type | None = None):
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise SchemaError("/", f"not valid JSON: {err}") from err
    return deserialize(doc, expected_type)
