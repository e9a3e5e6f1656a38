"""End-to-end orchestration under stub backends: stages, resume, determinism."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from procplan.dataset import load_manifest
from procplan.gateway import (
    ChatClient,
    FileCaptioner,
    Gateway,
    ResponseCache,
    SimilarityClient,
    StubChatBackend,
    StubSimilarityScorer,
    StubVideoBackend,
    VideoClient,
)
from procplan.model import (
    DEFAULT_INFERENCE_PARAMS,
    GoalPlan,
    GroundedPlan,
    JobStatus,
    PlanArm,
    TaskKind,
    VanillaTextPlan,
    validate,
)
from procplan.pipeline import (
    CaptionCollection,
    LedgerConflict,
    NoCaptions,
    Pipeline,
    RunConfig,
    RunState,
    StageStatus,
    load_goal_plan,
)
from procplan.prompts import TemplateKind

DATA = Path(__file__).parent / "data"
MANIFEST = DATA / "fixture_manifest.json"
SIDECARS = DATA / "sidecars"


def make_gateway(tmp_path, seed=7, responses=None, fail_prompts=(), cache=True):
    cache_store = ResponseCache(tmp_path / "cache" if cache else None)
    return Gateway(
        chat=ChatClient(StubChatBackend(seed=seed, responses=responses), cache=cache_store),
        captioner=FileCaptioner(SIDECARS),
        video=VideoClient(StubVideoBackend(polls_to_done=2, fail_prompts=fail_prompts)),
        similarity=SimilarityClient(StubSimilarityScorer(), cache=cache_store),
    )


def make_pipeline(tmp_path, **kwargs) -> Pipeline:
    gateway = make_gateway(tmp_path, **kwargs)
    manifest = load_manifest(MANIFEST)
    return Pipeline(gateway, manifest, tmp_path / "workspace")


def config(run_id="run1", arm=PlanArm.VGTVP, tasks=("apple-juice",), **kwargs) -> RunConfig:
    return RunConfig(
        run_id=run_id,
        arm=arm,
        model_id="stub-model",
        params=DEFAULT_INFERENCE_PARAMS,
        task_ids=tuple(tasks),
        **kwargs,
    )


class TestStages:
    def test_vanilla_plan_prompt_and_provenance(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        task = pipeline.manifest.task("apple-juice")
        plan = pipeline.generate_vanilla_plan(task, config())
        assert len(plan.steps) >= 1
        assert plan.provenance.backend_id == "stub-chat"
        again = pipeline.generate_vanilla_plan(task, config())
        assert again == plan  # cache replay keeps provenance identical

    def test_unparsable_twice_surfaces(self, tmp_path):
        refusal = {"step-by-step": "I cannot help with that."}
        pipeline = make_pipeline(tmp_path, responses=refusal)
        task = pipeline.manifest.task("apple-juice")
        from procplan.parsing import UnparsablePlan

        with pytest.raises(UnparsablePlan):
            pipeline.generate_vanilla_plan(task, config())
        assert len(pipeline.gateway.chat.backend.calls) == 2  # original + one re-prompt

    def test_collect_captions_seen(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        collection = pipeline.collect_captions(pipeline.manifest.task("apple-juice"), config())
        assert collection.source_task_ids == ("apple-juice",)
        assert len(collection.tracks) == 7
        assert [t.video_index for t in collection.tracks] == list(range(7))

    def test_collect_captions_unseen_order_and_sources(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        task = pipeline.manifest.task("carrot-mango-lassi")
        collection = pipeline.collect_captions(task, config(tasks=("carrot-mango-lassi",)))
        assert collection.source_task_ids == ("carrot-juice", "mango-lassi")
        assert len(collection.tracks) == 14
        texts = " ".join(s.text for t in collection.tracks[:7] for s in t.segments)
        assert "carrot" in texts  # carrot-juice tracks come first

    def test_collect_captions_partial_failure_skips(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        missing = SIDECARS / "apple-juice-03.mp4.captions.csv"
        backup = missing.read_text()
        missing.unlink()
        try:
            collection = pipeline.collect_captions(pipeline.manifest.task("apple-juice"), config())
        finally:
            missing.write_text(backup)
        assert len(collection.tracks) == 6
        assert 2 not in [t.video_index for t in collection.tracks]

    def test_collect_captions_all_missing_raises(self, tmp_path):
        gateway = make_gateway(tmp_path)
        gateway.captioner = FileCaptioner(tmp_path / "nowhere")
        manifest = load_manifest(MANIFEST)
        pipeline = Pipeline(gateway, manifest, tmp_path / "ws")
        with pytest.raises(NoCaptions):
            pipeline.collect_captions(manifest.task("apple-juice"), config())

    def test_fuse_captions_single_occurrence_fixture(self, tmp_path):
        canned = {
            "<person> <verb> <action>": (
                "1. A person washes the apples.\n"
                "2. A person slices apples on a wooden cutting board.\n"
                "3. The person pours water into a blender.\n"
                "4. The person strains the juice and serves it."
            )
        }
        pipeline = make_pipeline(tmp_path, responses=canned)
        task = pipeline.manifest.task("apple-juice")
        collection = pipeline.collect_captions(task, config())
        # the slicing scene appears in several source videos...
        slicing_tracks = [
            t for t in collection.tracks
            if any("sliced apples" in s.text for s in t.segments)
        ]
        assert len(slicing_tracks) > 1
        # ...but fusion merges them into a single step
        fused = pipeline.fuse_captions(task, collection.tracks, config())
        slicing_steps = [s for s in fused.steps if "slices apples" in s.sentence]
        assert len(slicing_steps) == 1

    def test_align_plan_every_step_has_visual(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        task = pipeline.manifest.task("apple-juice")
        cfg = config()
        vtp = pipeline.generate_vanilla_plan(task, cfg)
        collection = pipeline.collect_captions(task, cfg)
        foc = pipeline.fuse_captions(task, collection.tracks, cfg)
        plan = pipeline.align_plan(task, vtp, foc, cfg)
        assert all(step.visual for step in plan.steps)
        assert validate(plan) == []

    def test_variant_template_distinct_digest(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        task = pipeline.manifest.task("apple-juice")
        cfg = config()
        vtp = pipeline.generate_vanilla_plan(task, cfg)
        foc = pipeline.fuse_captions(
            task, pipeline.collect_captions(task, cfg).tracks, cfg
        )
        base = pipeline.align_plan(task, vtp, foc, cfg)
        variant_cfg = config(run_id="run-v", alignment_kind=TemplateKind.ALIGNMENT_VARIANT_A)
        variant = pipeline.align_plan(task, vtp, foc, variant_cfg)
        assert base.provenance.prompt_digest != variant.provenance.prompt_digest

    def test_video_plan_prompts_grounded(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        task = pipeline.manifest.task("apple-juice")
        cfg = config()
        vtp = pipeline.generate_vanilla_plan(task, cfg)
        foc = pipeline.fuse_captions(task, pipeline.collect_captions(task, cfg).tracks, cfg)
        plan = pipeline.align_plan(task, vtp, foc, cfg)
        items = pipeline.generate_video_plan(plan, cfg)
        assert len(items) == len(plan.steps)
        assert [i.prompt_used for i in items] == [s.visual for s in plan.steps]
        assert all(i.status is JobStatus.DONE for i in items)

    def test_video_plan_prompts_baseline(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        task = pipeline.manifest.task("apple-juice")
        cfg = config(arm=PlanArm.BASELINE)
        vtp = pipeline.generate_vanilla_plan(task, cfg)
        items = pipeline.generate_video_plan(vtp, cfg)
        assert len(items) == len(vtp.steps)
        for item, step in zip(items, vtp.steps):
            assert step.text in item.prompt_used
            assert step.context in item.prompt_used
            assert ".." not in item.prompt_used

    def test_video_failure_isolated_per_step(self, tmp_path):
        from procplan.model import GroundedStep
        from tests.test_model import make_provenance

        pipeline = make_pipeline(tmp_path, fail_prompts=("UNRENDERABLE",))
        plan = GroundedPlan(
            "apple-juice",
            (
                GroundedStep(1, "Wash.", "Wash the apples.", "A person washing apples."),
                GroundedStep(2, "Slice.", "Slice the apples.", "A person slicing apples."),
                GroundedStep(3, "Blend.", "Blend everything.", "UNRENDERABLE scene"),
                GroundedStep(4, "Serve.", "Serve the juice.", "A person pouring juice."),
            ),
            make_provenance(),
        )
        items = pipeline.generate_video_plan(plan, config())
        assert [i.status for i in items] == [
            JobStatus.DONE, JobStatus.DONE, JobStatus.FAILED, JobStatus.DONE,
        ]
        assert items[2].artifact_uri is None
        assert all(i.artifact_uri for i in items if i.status is JobStatus.DONE)


class TestRun:
    def test_fresh_vgtvp_run_completes(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        state = pipeline.run(config(tasks=("apple-juice", "carrot-juice")))
        for task_id in ("apple-juice", "carrot-juice"):
            for stage in ("vanilla", "captions", "foc", "aligned", "videos"):
                assert state.tasks[task_id][stage].status is StageStatus.DONE
            goal = load_goal_plan(pipeline, "run1", task_id)
            assert isinstance(goal.text_plan, GroundedPlan)
            assert len(goal.video_plan) == len(goal.text_plan.steps)
            assert validate(goal) == []

    def test_baseline_ledger_has_no_foc(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        state = pipeline.run(config(arm=PlanArm.BASELINE))
        stages = set(state.tasks["apple-juice"])
        assert stages == {"vanilla", "videos"}
        goal = load_goal_plan(pipeline, "run1", "apple-juice")
        assert isinstance(goal.text_plan, VanillaTextPlan)
        assert goal.arm is PlanArm.BASELINE

    def test_resume_skips_done_stages(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        cfg = config()
        pipeline.run(cfg, stop_after_stage="foc")
        calls_before = len(pipeline.gateway.chat.backend.calls)
        submissions_before = pipeline.gateway.video.backend.submissions

        state = pipeline.run(cfg)
        for stage in ("vanilla", "captions", "foc", "aligned", "videos"):
            assert state.tasks["apple-juice"][stage].status is StageStatus.DONE
        new_chat_calls = len(pipeline.gateway.chat.backend.calls) - calls_before
        assert new_chat_calls == 1  # alignment only; vanilla/captions/foc not re-executed
        assert pipeline.gateway.video.backend.submissions - submissions_before == len(
            load_goal_plan(pipeline, "run1", "apple-juice").text_plan.steps
        )

    def test_unseen_provenance_lists_two_seen_tasks(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        pipeline.run(config(tasks=("carrot-mango-lassi",)))
        doc = json.loads(
            pipeline.artifact_path("run1", "carrot-mango-lassi", "captions").read_text()
        )
        collection = CaptionCollection.from_doc(doc)
        assert collection.source_task_ids == ("carrot-juice", "mango-lassi")
        seen_kinds = {
            pipeline.manifest.task(tid).kind for tid in collection.source_task_ids
        }
        assert seen_kinds == {TaskKind.SEEN}

    def test_byte_identical_reruns_with_shared_cache(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        pipeline.run(config(run_id="run-a", tasks=("apple-juice", "carrot-mango-lassi")))
        pipeline.run(config(run_id="run-b", tasks=("apple-juice", "carrot-mango-lassi")))
        for task_id in ("apple-juice", "carrot-mango-lassi"):
            a = pipeline.artifact_path("run-a", task_id, "videos").read_bytes()
            b = pipeline.artifact_path("run-b", task_id, "videos").read_bytes()
            assert a == b

    def test_task_failure_isolates(self, tmp_path):
        refusal = {
            "What's the step-by-step procedure for Making Apple Juice?": "I cannot help with that."
        }
        pipeline = make_pipeline(tmp_path, responses=refusal)
        state = pipeline.run(config(tasks=("apple-juice", "carrot-juice")))
        assert state.tasks["apple-juice"]["vanilla"].status is StageStatus.FAILED
        assert state.tasks["apple-juice"]["vanilla"].error
        assert state.tasks["carrot-juice"]["videos"].status is StageStatus.DONE

    def test_run_id_reuse_with_different_config_rejected(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        pipeline.run(config())
        with pytest.raises(LedgerConflict):
            pipeline.run(config(arm=PlanArm.BASELINE))

    def test_concurrent_run_matches_sequential(self, tmp_path):
        sequential = make_pipeline(tmp_path / "seq")
        sequential.run(config(tasks=("apple-juice", "carrot-juice", "mango-lassi")))
        concurrent = make_pipeline(tmp_path / "par")
        concurrent.run(
            config(tasks=("apple-juice", "carrot-juice", "mango-lassi"), concurrency_limit=3)
        )
        for task_id in ("apple-juice", "carrot-juice", "mango-lassi"):
            a = sequential.artifact_path("run1", task_id, "videos").read_bytes()
            b = concurrent.artifact_path("run1", task_id, "videos").read_bytes()
            assert a == b

    def test_stage_plan_for_dry_run(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        plan = pipeline.stage_plan(config(arm=PlanArm.BASELINE, tasks=("apple-juice",)))
        assert plan == [("apple-juice", ("vanilla", "videos"))]

    def test_ledger_monotonicity_enforced_on_load(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        cfg = config()
        pipeline.run(cfg)
        ledger_path = pipeline._ledger_path("run1")
        doc = json.loads(ledger_path.read_text())
        doc["tasks"]["apple-juice"]["foc"]["status"] = "NotStarted"
        ledger_path.write_text(json.dumps(doc))
        with pytest.raises(LedgerConflict):
            pipeline.run(cfg)

    def test_state_round_trip(self, tmp_path):
        pipeline = make_pipeline(tmp_path)
        state = pipeline.run(config())
        restored = RunState.from_doc(json.loads(json.dumps(state.to_doc())))
        assert restored.to_doc() == state.to_doc()
