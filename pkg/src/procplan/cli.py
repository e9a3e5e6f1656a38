"""Command-line entry point wiring every subsystem.

Exit codes: 0 success, 1 operational failure (with a machine-readable
category on stderr), 2 usage errors. All artifacts land under the
workspace; secrets come only from environment variables named in the
backend config.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import judge as judge_mod
from .dataset import (
    IntegrityError,
    ManifestPolicy,
    StatScope,
    TokenClass,
    corpus_stats,
    load_manifest,
    reference_manifest_path,
)
from .gateway import Gateway, GatewayError, SimilarityRequest, load_gateway
from .metrics import (
    BleuConfig,
    MetricError,
    MssConfig,
    bleu,
    format_mss,
    meteor,
    mss,
    percentages_from_counts,
)
from .model import (
    DEFAULT_INFERENCE_PARAMS,
    GoalPlan,
    GroundedPlan,
    InferenceParams,
    JobStatus,
    PlanArm,
    SchemaError,
    VanillaTextPlan,
    read_document,
)
from .parsing import ParseError
from .pipeline import Pipeline, PipelineError, RunConfig, STAGES_BY_ARM
from .prompts import PromptError, TemplateKind, load_template_overrides
from .survey import (
    SurveyClient,
    SurveyClientError,
    SurveyStore,
    dump_comparisons,
    load_comparisons,
    plan_side_from_goal,
)
from .dataset import tokenize

OPERATIONAL_ERRORS = (
    GatewayError,
    IntegrityError,
    MetricError,
    ParseError,
    PipelineError,
    PromptError,
    SchemaError,
    SurveyClientError,
    judge_mod.JudgeError,
    FileNotFoundError,
    KeyError,
    ValueError,
)

ARM_NAMES = {"vgtvp": PlanArm.VGTVP, "baseline": PlanArm.BASELINE}
TEMPLATE_NAMES = {
    "paper-v1": TemplateKind.ALIGNMENT,
    "variant-a": TemplateKind.ALIGNMENT_VARIANT_A,
    "variant-b": TemplateKind.ALIGNMENT_VARIANT_B,
}


def _fail(err: Exception) -> None:
    category = type(err).__name__
    click.echo(f"error: category={category} {err}", err=True)
    sys.exit(1)


def run_guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except OPERATIONAL_ERRORS as err:
        _fail(err)


@click.group()
def main():
    """Procedural plan generation and evaluation."""


# -- shared option plumbing -----------------------------------------------------

def _load_manifest_opt(manifest_path: str | None, exact_counts: bool = False):
    path = Path(manifest_path) if manifest_path else reference_manifest_path()
    return load_manifest(path, ManifestPolicy(exact_video_counts=exact_counts))


def _gateway_from(backend_config: str | None, workspace: str, stub_seed: int) -> Gateway:
    cache_dir = Path(workspace) / ".cache"
    if backend_config:
        return load_gateway(Path(backend_config), cache_dir=cache_dir)
    return Gateway.default_stub(cache_dir=cache_dir, seed=stub_seed)


def _params_from(model_ctx: dict) -> InferenceParams:
    params = DEFAULT_INFERENCE_PARAMS
    overrides = {k: v for k, v in model_ctx.items() if v is not None}
    if overrides:
        params = InferenceParams(
            temperature=overrides.get("temperature", params.temperature),
            top_k=overrides.get("top_k", params.top_k),
            top_p=overrides.get("top_p", params.top_p),
            min_p=overrides.get("min_p", params.min_p),
            n_batch=params.n_batch,
            n_ctx=params.n_ctx,
            system_prompt=overrides.get("system_prompt", params.system_prompt),
        )
    return params


def pipeline_options(fn):
    fn = click.option("--manifest", type=click.Path(), default=None,
                      help="Manifest file (defaults to the bundled reference manifest).")(fn)
    fn = click.option("--workspace", type=click.Path(), default="workspace", show_default=True)(fn)
    fn = click.option("--run-id", default="run1", show_default=True)(fn)
    fn = click.option("--arm", type=click.Choice(sorted(ARM_NAMES)), default="vgtvp",
                      show_default=True)(fn)
    fn = click.option("--model", "model_id", default=None, help="Chat model id.")(fn)
    fn = click.option("--backend-config", type=click.Path(), default=None,
                      help="Backend config JSON; defaults to offline stubs.")(fn)
    fn = click.option("--stub-seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--template", "template_name", type=click.Choice(sorted(TEMPLATE_NAMES)),
                      default="paper-v1", show_default=True)(fn)
    fn = click.option("--templates-file", type=click.Path(), default=None,
                      help="Prompt template override document.")(fn)
    fn = click.option("--temperature", type=float, default=None)(fn)
    fn = click.option("--top-k", type=int, default=None)(fn)
    fn = click.option("--top-p", type=float, default=None)(fn)
    fn = click.option("--min-p", type=float, default=None)(fn)
    return fn


def _build_run(
    manifest, workspace, run_id, arm, model_id, backend_config, stub_seed,
    template_name, templates_file, tasks, concurrency=1, **params_kw,
) -> tuple[Pipeline, RunConfig]:
    loaded = _load_manifest_opt(manifest)
    gateway = _gateway_from(backend_config, workspace, stub_seed)
    templates = tuple(load_template_overrides(Path(templates_file))) if templates_file else ()
    task_ids = tuple(tasks) if tasks else tuple(t.id for t in loaded.tasks)
    config = RunConfig(
        run_id=run_id,
        arm=ARM_NAMES[arm],
        model_id=model_id or gateway.chat_model_id,
        params=_params_from(params_kw),
        task_ids=task_ids,
        concurrency_limit=concurrency,
        alignment_kind=TEMPLATE_NAMES[template_name],
        templates=templates,
    )
    return Pipeline(gateway, loaded, Path(workspace)), config


# -- validate ---------------------------------------------------------------------

@main.command()
@click.option("--manifest", type=click.Path(), default=None)
@click.option("--exact-counts", is_flag=True,
              help="Require exactly 7 or 10 videos per seen task.")
def validate(manifest, exact_counts):
    """Validate a task manifest and print its counts."""
    loaded = run_guarded(_load_manifest_opt, manifest, exact_counts)
    counts = loaded.counts()
    click.echo(f"{counts['seen']} seen, {counts['unseen']} unseen")
    for domain, n in sorted(counts["per_domain"].items()):
        click.echo(f"  {domain}: {n}")


# -- single stages and full runs -----------------------------------------------------

def _single_stage_command(name: str, stage: str, help_text: str):
    @main.command(name=name, help=help_text)
    @pipeline_options
    @click.option("--task", "tasks", multiple=True, required=True)
    def _cmd(tasks, **kwargs):
        pipeline, config = run_guarded(_build_run, tasks=tasks, **kwargs)
        for task_id in config.task_ids:
            run_guarded(pipeline.run_stage, config, task_id, stage)
            path = pipeline.artifact_path(config.run_id, task_id, stage)
            click.echo(f"{task_id}: {stage} done -> {path}")

    return _cmd


_single_stage_command("plan", "vanilla", "Generate the vanilla text plan for tasks.")
_single_stage_command("captions", "captions", "Collect caption tracks for tasks.")
_single_stage_command("fuse", "foc", "Fuse collected captions into one step sequence.")
_single_stage_command("align", "aligned", "Produce the grounded text/context/visual plan.")
_single_stage_command("videos", "videos", "Submit per-step video jobs and assemble the goal plan.")


@main.command()
@pipeline_options
@click.option("--task", "tasks", multiple=True,
              help="Task id to include (repeatable); all manifest tasks when omitted.")
@click.option("--concurrency", type=int, default=1, show_default=True)
@click.option("--dry-run", is_flag=True, help="Print the stage plan without any backend calls.")
def run(tasks, concurrency, dry_run, **kwargs):
    """Execute the full arm over the chosen tasks, resumably."""
    pipeline, config = run_guarded(_build_run, tasks=tasks, concurrency=concurrency, **kwargs)
    if dry_run:
        for task_id, stages in pipeline.stage_plan(config):
            click.echo(f"{task_id}: {' -> '.join(stages)}")
        return
    state = run_guarded(pipeline.run, config)
    failed = 0
    for task_id in config.task_ids:
        stages = state.tasks.get(task_id, {})
        bad = [name for name, s in stages.items() if s.status.value == "Failed"]
        if bad:
            failed += 1
            click.echo(f"{task_id}: FAILED at {', '.join(bad)}")
        else:
            click.echo(f"{task_id}: done")
    sys.exit(1 if failed == len(config.task_ids) else 0)


# -- evaluation -----------------------------------------------------------------------

def _plan_text_tokens(plan) -> list[str]:
    tokens: list[str] = []
    for step in plan.steps:
        tokens.extend(tokenize(step.text))
        tokens.extend(tokenize(step.context))
    return tokens


def _load_text_plan(path: Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc.get("type")
    if kind == "goal_plan":
        return read_document(path, GoalPlan).text_plan
    if kind == "grounded_plan":
        return read_document(path, GroundedPlan)
    return read_document(path, VanillaTextPlan)


@main.command("eval-text")
@click.option("--candidate", type=click.Path(exists=True), required=True,
              help="Persisted plan document (goal, grounded, or vanilla).")
@click.option("--reference", "references", type=click.Path(exists=True), multiple=True,
              required=True, help="Reference plan text file (repeatable).")
@click.option("--max-n", type=int, default=4, show_default=True)
@click.option("--task-id", default="-")
@click.option("--arm", default="-")
def eval_text(candidate, references, max_n, task_id, arm):
    """Sentence BLEU and METEOR-lite of a plan against reference texts."""
    def go():
        plan = _load_text_plan(Path(candidate))
        cand_tokens = _plan_text_tokens(plan)
        ref_tokens = [tokenize(Path(r).read_text(encoding="utf-8")) for r in references]
        bleu_score = bleu(cand_tokens, ref_tokens, BleuConfig(max_n=max_n))
        meteor_score = max(meteor(cand_tokens, ref) for ref in ref_tokens)
        click.echo("task_id,arm,metric,value")
        click.echo(f"{task_id},{arm},bleu,{bleu_score!r}")
        click.echo(f"{task_id},{arm},meteor,{meteor_score!r}")

    run_guarded(go)


@main.command("eval-mss")
@click.option("--workspace", type=click.Path(), default="workspace", show_default=True)
@click.option("--run-id", default="run1", show_default=True)
@click.option("--task", "task_id", required=True)
@click.option("--manifest", type=click.Path(), default=None)
@click.option("--frames-file", type=click.Path(exists=True), required=True,
              help='JSON {"artifact_uri": ["frame ref", ...]} frame extraction map.')
@click.option("--frame-rate", type=int, default=20, show_default=True)
@click.option("--sampling", type=click.Choice(["stride", "fps"]), default="stride",
              show_default=True)
@click.option("--backend-config", type=click.Path(), default=None)
@click.option("--stub-seed", type=int, default=0)
def eval_mss(workspace, run_id, task_id, manifest, frames_file, frame_rate, sampling,
             backend_config, stub_seed):
    """Mean similarity score of a task's generated clips against their prompts."""
    def go():
        loaded = _load_manifest_opt(manifest)
        gateway = _gateway_from(backend_config, workspace, stub_seed)
        pipeline = Pipeline(gateway, loaded, Path(workspace))
        goal = read_document(pipeline.artifact_path(run_id, task_id, "videos"), GoalPlan)
        frames_map = json.loads(Path(frames_file).read_text(encoding="utf-8"))
        config = MssConfig(frame_rate=frame_rate, sampling=sampling)

        def scorer(frame_ref, text):
            return gateway.similarity.score(SimilarityRequest(frame_ref, text))

        click.echo("task_id,arm,metric,value")
        values = []
        for item in goal.video_plan:
            if item.status is not JobStatus.DONE:
                continue
            frames = frames_map.get(item.artifact_uri)
            if not frames:
                continue
            value = mss(item.artifact_uri, item.prompt_used, config, scorer, lambda a: frames)
            values.append(value)
            click.echo(f"{task_id},{goal.arm.value},mss_step_{item.step_index},{format_mss(value)}")
        if not values:
            raise MetricError("no completed clips with frames to score")
        mean = sum(values) / len(values)
        click.echo(f"{task_id},{goal.arm.value},mss,{format_mss(mean)}")

    run_guarded(go)


def _plan_document_text(plan) -> str:
    lines = []
    for step in plan.steps:
        lines.append(f"Step {step.index}: {step.text}")
        lines.append(f"Context: {step.context}")
        if hasattr(step, "visual"):
            lines.append(f"Visual: {step.visual}")
        lines.append("")
    return "\n".join(lines).strip()


@main.command("judge")
@click.option("--workspace", type=click.Path(), default="workspace", show_default=True)
@click.option("--run-id", default="run1", show_default=True)
@click.option("--task", "task_id", required=True)
@click.option("--manifest", type=click.Path(), default=None)
@click.option("--judge-model", default="stub-judge", show_default=True)
@click.option("--backend-config", type=click.Path(), default=None)
@click.option("--stub-seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None, help="Write the CSV report here.")
def judge_cmd(workspace, run_id, task_id, manifest, judge_model, backend_config, stub_seed, out):
    """Score a persisted goal plan with the rubric judge."""
    def go():
        loaded = _load_manifest_opt(manifest)
        gateway = _gateway_from(backend_config, workspace, stub_seed)
        pipeline = Pipeline(gateway, loaded, Path(workspace))
        goal = read_document(pipeline.artifact_path(run_id, task_id, "videos"), GoalPlan)
        task = loaded.task(task_id)
        scores, _prov = judge_mod.judge(
            _plan_document_text(goal.text_plan), task.title, gateway.chat, judge_model
        )
        csv = judge_mod.export_judge_rows([(task_id, goal.arm.value, scores)])
        if out:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            Path(out).write_text(csv, encoding="utf-8")
            feedback_path = Path(out).with_suffix(".feedback.txt")
            feedback_path.write_text(judge_mod.feedback_text(scores), encoding="utf-8")
        click.echo(csv.strip())
        click.echo(f"total: {scores.grand_total}")

    run_guarded(go)


@main.command()
@click.option("--workspace", type=click.Path(), default="workspace", show_default=True)
@click.option("--run-id", default="run1", show_default=True)
@click.option("--scope", type=click.Choice([s.value for s in StatScope]), default="All",
              show_default=True)
@click.option("--token-class", type=click.Choice([t.value for t in TokenClass]), default="Word",
              show_default=True)
@click.option("--top-k", type=int, default=30, show_default=True)
@click.option("--stage", type=click.Choice(["vanilla", "aligned"]), default="aligned",
              show_default=True)
def stats(workspace, run_id, scope, token_class, top_k, stage):
    """Token frequency table over a run's persisted plans (word-cloud substitute)."""
    def go():
        run_dir = Path(workspace) / run_id
        expected = GroundedPlan if stage == "aligned" else VanillaTextPlan
        plans = []
        for path in sorted(run_dir.glob(f"*/{stage}.json")):
            plans.append(read_document(path, expected))
        table = corpus_stats(plans, StatScope(scope), TokenClass(token_class), top_k=top_k)
        click.echo(table.to_csv().strip())

    run_guarded(go)


@main.command("export")
@click.option("--workspace", type=click.Path(), default="workspace", show_default=True)
@click.option("--run-id", default="run1", show_default=True)
def export_cmd(workspace, run_id):
    """Run summary: per task, stage statuses and finished clip counts."""
    def go():
        ledger_path = Path(workspace) / run_id / "ledger.json"
        ledger = json.loads(ledger_path.read_text(encoding="utf-8"))
        click.echo("task_id,stage,status")
        for task_id, stages in sorted(ledger["tasks"].items()):
            for stage, entry in stages.items():
                click.echo(f"{task_id},{stage},{entry['status']}")

    run_guarded(go)


# -- survey ----------------------------------------------------------------------------

@main.group()
def survey():
    """Pairwise preference survey administration and headless clients."""


@survey.command("build-comparisons")
@click.option("--workspace", type=click.Path(), default="workspace", show_default=True)
@click.option("--run-a", required=True, help="Run id providing canonical side A.")
@click.option("--run-b", required=True, help="Run id providing canonical side B.")
@click.option("--pairing", required=True, help="Label for this model pairing.")
@click.option("--manifest", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), required=True)
def survey_build(workspace, run_a, run_b, pairing, manifest, out):
    """Pair the two runs' goal plans per task into a comparisons file."""
    def go():
        from .survey.store import Comparison

        loaded = _load_manifest_opt(manifest)
        comparisons = []
        root = Path(workspace)
        for goal_a_path in sorted(root.glob(f"{run_a}/*/goal.json")):
            task_id = goal_a_path.parent.name
            goal_b_path = root / run_b / task_id / "goal.json"
            if not goal_b_path.exists():
                continue
            goal_a = read_document(goal_a_path, GoalPlan)
            goal_b = read_document(goal_b_path, GoalPlan)
            task = loaded.task(task_id)
            comparisons.append(Comparison(
                id=f"{pairing}-{task_id}",
                task_id=task_id,
                task_kind=task.kind.value,
                pairing=pairing,
                side_a=plan_side_from_goal(goal_a, run_a),
                side_b=plan_side_from_goal(goal_b, run_b),
            ))
        if not comparisons:
            raise ValueError("no overlapping goal plans between the two runs")
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(
            json.dumps(dump_comparisons(comparisons), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        click.echo(f"wrote {len(comparisons)} comparisons -> {out}")

    run_guarded(go)


@survey.command("serve")
@click.option("--store", "store_dir", type=click.Path(), required=True)
@click.option("--comparisons", type=click.Path(exists=True), required=True)
@click.option("--admin-token", envvar="SURVEY_ADMIN_TOKEN", required=True)
@click.option("--blinding-seed", type=int, default=0, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="Directory of built UI assets to serve at /.")
def survey_serve(store_dir, comparisons, admin_token, blinding_seed, host, port, ui_dir):
    """Serve the survey endpoints (and the UI when provided)."""
    def go():
        import uvicorn

        from .survey import create_app

        store = SurveyStore(
            Path(store_dir), load_comparisons(Path(comparisons)), blinding_seed=blinding_seed
        )
        app = create_app(store, admin_token=admin_token,
                         ui_dir=Path(ui_dir) if ui_dir else None)
        uvicorn.run(app, host=host, port=port, log_level="warning")

    run_guarded(go)


@survey.command("register")
@click.option("--base-url", required=True)
@click.option("--subject", "subject_id", default=None)
def survey_register(base_url, subject_id):
    def go():
        doc = SurveyClient(base_url).register(subject_id)
        click.echo(json.dumps(doc))

    run_guarded(go)


@survey.command("next")
@click.option("--base-url", required=True)
@click.option("--token", required=True)
def survey_next(base_url, token):
    def go():
        assignment = SurveyClient(base_url, token=token).next_assignment()
        click.echo(json.dumps(assignment if assignment else {"available": False}))

    run_guarded(go)


@survey.command("submit")
@click.option("--base-url", required=True)
@click.option("--token", required=True)
@click.option("--assignment", "assignment_id", required=True)
@click.option("--verdict", "verdicts", multiple=True, required=True,
              help="aspect=Left|Tie|Right, repeated for all four aspects.")
def survey_submit(base_url, token, assignment_id, verdicts):
    def go():
        parsed = {}
        for entry in verdicts:
            aspect, _, side = entry.partition("=")
            if not side:
                raise ValueError(f"verdict {entry!r} must look like Aspect=Left")
            parsed[aspect] = side
        result = SurveyClient(base_url, token=token).submit(assignment_id, parsed)
        click.echo(json.dumps(result))

    run_guarded(go)


@survey.command("export")
@click.option("--base-url", required=True)
@click.option("--admin-token", envvar="SURVEY_ADMIN_TOKEN", required=True)
@click.option("--pairing", default=None)
@click.option("--kind", default=None)
@click.option("--percentages", is_flag=True, help="Add half-up win/tie/lose percentages.")
def survey_export(base_url, admin_token, pairing, kind, percentages):
    def go():
        doc = SurveyClient(base_url).export(admin_token, pairing=pairing, kind=kind)
        if percentages:
            for aspects in doc["tallies"].values():
                for tally in aspects.values():
                    win, tie, lose = percentages_from_counts(
                        tally["win"], tally["tie"], tally["lose"]
                    )
                    tally["percentages"] = [str(win), str(tie), str(lose)]
        click.echo(json.dumps(doc, indent=2, sort_keys=True))

    run_guarded(go)


if __name__ == "__main__":
    main()
