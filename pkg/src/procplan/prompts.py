"""Prompt templates and deterministic rendering.

Five built-in templates (version "paper-v1"): the vanilla step-list
elicitation, the caption-fusion instruction, the text/context/visual
alignment instruction, and two alignment phrasing variants. Templates are
data: an override file can swap any body without code changes.

Rendering is pure string substitution; this module never talks to a model.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

from .model import CaptionTrack, FusedCaption, TaskSpec, VanillaTextPlan


class TemplateKind(str, Enum):
    VANILLA = "Vanilla"
    DESCRIPTION = "Description"
    ALIGNMENT = "Alignment"
    ALIGNMENT_VARIANT_A = "AlignmentVariantA"
    ALIGNMENT_VARIANT_B = "AlignmentVariantB"


#: Placeholders each kind must carry in its body.
REQUIRED_PLACEHOLDERS: dict[TemplateKind, tuple[str, ...]] = {
    TemplateKind.VANILLA: ("{TASK}",),
    TemplateKind.DESCRIPTION: ("{TASK}", "{CAPTIONS}"),
    TemplateKind.ALIGNMENT: ("{TASK}", "{CAPTIONS}", "{VTP}"),
    TemplateKind.ALIGNMENT_VARIANT_A: ("{TASK}", "{CAPTIONS}", "{VTP}"),
    TemplateKind.ALIGNMENT_VARIANT_B: ("{TASK}", "{CAPTIONS}", "{VTP}"),
}

_PLACEHOLDERS = ("{TASK}", "{CAPTIONS}", "{VTP}")


class PromptError(Exception):
    pass


class UnknownKind(PromptError):
    def __init__(self, kind):
        super().__init__(f"unknown template kind: {kind!r}")


class MissingInput(PromptError):
    def __init__(self, kind: TemplateKind, placeholder: str):
        self.kind = kind
        self.placeholder = placeholder
        super().__init__(f"{kind.value} requires {placeholder} but no input was given")


class InvalidTemplate(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    kind: TemplateKind
    body: str
    version: str

    def missing_placeholders(self) -> list[str]:
        return [p for p in REQUIRED_PLACEHOLDERS[self.kind] if p not in self.body]


@dataclass(frozen=True)
class RenderedPrompt:
    template_version: str
    text: str
    digest: str


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


_VANILLA_BODY = "What's the step-by-step procedure for {TASK}?"

_DESCRIPTION_BODY = (
    "{CAPTIONS}\n\n"
    "According to the captions above, then prepare the logical video captions "
    "for the task procedures of the {TASK} step-by-step in a sentence template "
    "of <person> <verb> <action>?"
)

_ALIGNMENT_BODY = (
    "Rewrite the step-by-step procedures of {TASK} by using video captions "
    "pair-wisely in a template <text>, <context> and <visual> separately."
    "\n\n{CAPTIONS}\n\n{VTP}"
)

_ALIGNMENT_VARIANT_A_BODY = (
    "What is the step-by-step procedure for {TASK}? Rewrite the textual "
    "instruction of {TASK} with visualized instruction pair-wisely in a "
    "template <text> <context>, and <visual> separately."
    "\n\n{CAPTIONS}\n\n{VTP}"
)

_ALIGNMENT_VARIANT_B_BODY = (
    "What is the step-by-step procedure for {TASK}? Rewrite the textual "
    "instruction of {TASK} with visualized video instruction pair-wisely in a "
    "template <text> <context>, and <visual> separately."
    "\n\n{CAPTIONS}\n\n{VTP}"
)

DEFAULT_TEMPLATE_VERSION = "paper-v1"


def default_templates() -> list[PromptTemplate]:
    """All five built-in templates, version "paper-v1"."""
    bodies = {
        TemplateKind.VANILLA: _VANILLA_BODY,
        TemplateKind.DESCRIPTION: _DESCRIPTION_BODY,
        TemplateKind.ALIGNMENT: _ALIGNMENT_BODY,
        TemplateKind.ALIGNMENT_VARIANT_A: _ALIGNMENT_VARIANT_A_BODY,
        TemplateKind.ALIGNMENT_VARIANT_B: _ALIGNMENT_VARIANT_B_BODY,
    }
    return [
        PromptTemplate(kind=kind, body=body, version=DEFAULT_TEMPLATE_VERSION)
        for kind, body in bodies.items()
    ]


def _template_map(templates: Iterable[PromptTemplate] | None) -> dict[TemplateKind, PromptTemplate]:
    out = {t.kind: t for t in default_templates()}
    if templates:
        for t in templates:
            out[t.kind] = t
    return out


def load_template_overrides(path: Path) -> list[PromptTemplate]:
    """Read a kind -> {body, version} override document, validating placeholders."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise InvalidTemplate("override file must be an object mapping kind to template")
    out = []
    for raw_kind, entry in doc.items():
        try:
            kind = TemplateKind(raw_kind)
        except ValueError:
            raise UnknownKind(raw_kind) from None
        if not isinstance(entry, dict) or "body" not in entry:
            raise InvalidTemplate(f"{raw_kind}: expected an object with a 'body' field")
        template = PromptTemplate(
            kind=kind,
            body=str(entry["body"]),
            version=str(entry.get("version", "override")),
        )
        missing = template.missing_placeholders()
        if missing:
            raise InvalidTemplate(f"{raw_kind}: body lacks required placeholders {missing}")
        out.append(template)
    return out


def _fmt_sec(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return format(float(value), "g")


def serialize_caption_block(captions: Union[str, FusedCaption, Iterable[CaptionTrack]]) -> str:
    """Flatten caption input into the block the templates embed.

    Raw tracks keep their timing evidence ("Video {v}, {start}-{end}s: {text}");
    fused captions render as a numbered sentence list; strings pass through.
    """
    if isinstance(captions, str):
        return captions
    if isinstance(captions, FusedCaption):
        return "\n".join(f"{i + 1}. {step.sentence}" for i, step in enumerate(captions.steps))
    lines = []
    for track in captions:
        for seg in track.segments:
            lines.append(
                f"Video {track.video_index}, {_fmt_sec(seg.start_sec)}-{_fmt_sec(seg.end_sec)}s: {seg.text}"
            )
    return "\n".join(lines)


def serialize_vtp_block(vtp: Union[str, VanillaTextPlan]) -> str:
    if isinstance(vtp, str):
        return vtp
    return "\n".join(f"Step {s.index}: {s.text} — {s.context}" for s in vtp.steps)


def render(
    kind: TemplateKind,
    task: TaskSpec,
    captions: Union[str, FusedCaption, Iterable[CaptionTrack], None] = None,
    vtp: Union[str, VanillaTextPlan, None] = None,
    templates: Iterable[PromptTemplate] | None = None,
) -> RenderedPrompt:
    """Substitute task/captions/vtp into the template for *kind*.

    Deterministic: identical inputs give byte-identical text and digest.
    Raises MissingInput when *kind* needs an input that was not given.
    """
    if not isinstance(kind, TemplateKind):
        raise UnknownKind(kind)
    template = _template_map(templates)[kind]
    required = REQUIRED_PLACEHOLDERS[kind]

    if "{CAPTIONS}" in required and captions is None:
        raise MissingInput(kind, "{CAPTIONS}")
    if "{VTP}" in required and vtp is None:
        raise MissingInput(kind, "{VTP}")

    title = task.title
    # Task titles frequently end in "?"; don't double it against a template's own.
    if "{TASK}?" in template.body and title.endswith("?"):
        title = title.rstrip("?")

    text = template.body.replace("{TASK}", title)
    if captions is not None:
        text = text.replace("{CAPTIONS}", serialize_caption_block(captions))
    if vtp is not None:
        text = text.replace("{VTP}", serialize_vtp_block(vtp))

    for placeholder in _PLACEHOLDERS:
        if placeholder in text:
            raise MissingInput(kind, placeholder)

    return RenderedPrompt(
        template_version=template.version,
        text=text,
        digest=text_digest(text),
    )
