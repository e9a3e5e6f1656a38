"""Template rendering: wording, determinism, required inputs."""

from __future__ import annotations

import json

import pytest

from procplan.model import (
    CaptionSegment,
    CaptionTrack,
    Domain,
    TaskKind,
    TaskSpec,
    VanillaStep,
    VanillaTextPlan,
    VideoRef,
)
from procplan.prompts import (
    InvalidTemplate,
    MissingInput,
    PromptTemplate,
    TemplateKind,
    UnknownKind,
    default_templates,
    load_template_overrides,
    render,
    serialize_caption_block,
)
from tests.test_model import make_provenance


def task(title="How to Cook Spaghetti?"):
    return TaskSpec(
        id="spaghetti",
        title=title,
        domain=Domain.DINNER,
        kind=TaskKind.SEEN,
        video_refs=tuple(VideoRef(f"v{i}.mp4") for i in range(7)),
    )


def tracks():
    return [
        CaptionTrack(0, (CaptionSegment(0, 17, 26, "wooden cutting board with sliced apples on it"),)),
        CaptionTrack(1, (CaptionSegment(1, 5, 9.5, "pouring water into a blender"),)),
    ]


def vtp():
    return VanillaTextPlan(
        "spaghetti",
        (VanillaStep(1, "Boil water.", "Fill a large pot."), VanillaStep(2, "Add pasta.", "Add pasta.")),
        make_provenance(),
    )


def test_vanilla_wording_exact():
    out = render(TemplateKind.VANILLA, task())
    assert out.text == "What's the step-by-step procedure for How to Cook Spaghetti?"


def test_vanilla_title_without_question_mark():
    out = render(TemplateKind.VANILLA, task("How to Cook Spaghetti"))
    assert out.text == "What's the step-by-step procedure for How to Cook Spaghetti?"


def test_alignment_begins_with_instruction_then_captions_then_vtp():
    out = render(TemplateKind.ALIGNMENT, task(), captions=tracks(), vtp=vtp())
    assert out.text.startswith(
        "Rewrite the step-by-step procedures of How to Cook Spaghetti? by using "
        "video captions pair-wisely in a template <text>, <context> and <visual> separately."
    )
    captions_pos = out.text.index("Video 0, 17-26s: wooden cutting board with sliced apples on it")
    vtp_pos = out.text.index("Step 1: Boil water. — Fill a large pot.")
    assert captions_pos < vtp_pos


def test_description_missing_captions_raises():
    with pytest.raises(MissingInput) as err:
        render(TemplateKind.DESCRIPTION, task())
    assert err.value.placeholder == "{CAPTIONS}"


def test_alignment_missing_vtp_raises():
    with pytest.raises(MissingInput):
        render(TemplateKind.ALIGNMENT, task(), captions=tracks())


def test_unknown_kind():
    with pytest.raises(UnknownKind):
        render("NotAKind", task())  # type: ignore[arg-type]


def test_default_templates_shape():
    templates = default_templates()
    assert len(templates) == 5
    assert all(t.version == "paper-v1" for t in templates)
    assert all(t.missing_placeholders() == [] for t in templates)
    by_kind = {t.kind: t for t in templates}
    assert by_kind[TemplateKind.VANILLA].body == "What's the step-by-step procedure for {TASK}?"


def test_render_is_deterministic():
    a = render(TemplateKind.ALIGNMENT, task(), captions=tracks(), vtp=vtp())
    b = render(TemplateKind.ALIGNMENT, task(), captions=tracks(), vtp=vtp())
    assert a == b
    assert a.digest == b.digest


def test_distinct_texts_distinct_digests():
    a = render(TemplateKind.VANILLA, task("How to Cook Spaghetti?"))
    b = render(TemplateKind.VANILLA, task("How to Brew a Pot of Tea?"))
    assert a.text != b.text
    assert a.digest != b.digest


def test_variant_digest_differs_from_main_alignment():
    base = render(TemplateKind.ALIGNMENT, task("How to make pancakes?"), captions=tracks(), vtp=vtp())
    variant = render(
        TemplateKind.ALIGNMENT_VARIANT_A, task("How to make pancakes?"), captions=tracks(), vtp=vtp()
    )
    assert variant.digest != base.digest
    assert variant.text.startswith(
        "What is the step-by-step procedure for How to make pancakes? "
        "Rewrite the textual instruction of How to make pancakes with visualized "
        "instruction pair-wisely in a template <text> <context>, and <visual> separately."
    )


def test_variant_b_mentions_video_instruction():
    out = render(
        TemplateKind.ALIGNMENT_VARIANT_B, task("How to make pancakes?"), captions=tracks(), vtp=vtp()
    )
    assert "visualized video instruction pair-wisely" in out.text


def test_description_captions_precede_instruction():
    out = render(TemplateKind.DESCRIPTION, task(), captions=tracks())
    assert out.text.index("Video 0, 17-26s") < out.text.index("According to the captions above")
    assert "sentence template of <person> <verb> <action>?" in out.text


def test_caption_block_fractional_seconds():
    block = serialize_caption_block(tracks())
    assert "Video 1, 5-9.5s: pouring water into a blender" in block


def test_overrides_validated(tmp_path):
    good = tmp_path / "templates.json"
    good.write_text(json.dumps({"Vanilla": {"body": "Steps for {TASK}?", "version": "x1"}}))
    loaded = load_template_overrides(good)
    assert loaded == [PromptTemplate(TemplateKind.VANILLA, "Steps for {TASK}?", "x1")]
    out = render(TemplateKind.VANILLA, task("Tea"), templates=loaded)
    assert out.text == "Steps for Tea?"

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"Description": {"body": "no placeholders"}}))
    with pytest.raises(InvalidTemplate):
        load_template_overrides(bad)

    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"Nope": {"body": "{TASK}"}}))
    with pytest.raises(UnknownKind):
        load_template_overrides(unknown)
