"""Task manifest loading, unseen-task composition, and corpus statistics.

The manifest is the dataset of record: 5 domains, seen tasks backed by
instructional-video references, unseen tasks composed from exactly two
related seen tasks. A reference manifest with placeholder video locators
ships as package data; real locators are user-supplied.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .model import (
    Domain,
    GroundedPlan,
    SchemaError,
    TaskKind,
    TaskSpec,
    VanillaTextPlan,
    VideoRef,
    Violation,
    validate,
)
from .model import _decode_task_spec, _field_list, _field_str  # shared decode helpers


class IntegrityError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = "; ".join(f"{v.code} at {v.path}" for v in violations[:8])
        more = "" if len(violations) <= 8 else f" (+{len(violations) - 8} more)"
        super().__init__(f"manifest integrity violations: {lines}{more}")


@dataclass(frozen=True)
class ManifestPolicy:
    #: When set, seen tasks must carry exactly 7 or exactly 10 videos rather
    #: than any count in 7..10.
    exact_video_counts: bool = False


@dataclass(frozen=True)
class Manifest:
    version: str
    domains: tuple[Domain, ...]
    tasks: tuple[TaskSpec, ...]

    def task(self, task_id: str) -> TaskSpec:
        for task in self.tasks:
            if task.id == task_id:
                return task
        raise KeyError(task_id)

    def counts(self) -> dict:
        per_domain: Counter = Counter()
        seen = unseen = 0
        for task in self.tasks:
            per_domain[task.domain.value] += 1
            if task.kind is TaskKind.SEEN:
                seen += 1
            else:
                unseen += 1
        return {"seen": seen, "unseen": unseen, "per_domain": dict(per_domain)}


def validate_manifest(manifest: Manifest, policy: ManifestPolicy | None = None) -> list[Violation]:
    policy = policy or ManifestPolicy()
    violations: list[Violation] = []

    if len(manifest.domains) != 5:
        violations.append(Violation(
            "domain_count", "/domains", f"expected exactly 5 domains, found {len(manifest.domains)}"
        ))
    if len(set(manifest.domains)) != len(manifest.domains):
        violations.append(Violation("domain_duplicate", "/domains", "duplicate domain"))

    by_id: dict[str, TaskSpec] = {}
    for i, task in enumerate(manifest.tasks):
        path = f"/tasks/{i}"
        if task.id in by_id:
            violations.append(Violation(
                "duplicate_task_id", f"{path}/id", f"task id {task.id!r} appears more than once"
            ))
        else:
            by_id[task.id] = task
        if task.domain not in manifest.domains:
            violations.append(Violation(
                "unknown_domain", f"{path}/domain", f"{task.domain.value} not in manifest domains"
            ))
        for violation in validate(task):
            violations.append(Violation(violation.code, f"{path}{violation.path}", violation.message))
        if (
            policy.exact_video_counts
            and task.kind is TaskKind.SEEN
            and len(task.video_refs) not in (7, 10)
        ):
            violations.append(Violation(
                "video_count_not_exact", f"{path}/video_refs",
                f"policy requires exactly 7 or 10 videos, found {len(task.video_refs)}",
            ))

    for i, task in enumerate(manifest.tasks):
        if task.kind is not TaskKind.UNSEEN:
            continue
        for j, related_id in enumerate(task.related_seen):
            path = f"/tasks/{i}/related_seen/{j}"
            related = by_id.get(related_id)
            if related is None:
                violations.append(Violation(
                    "related_missing", path, f"related task {related_id!r} not in manifest"
                ))
            elif related.kind is not TaskKind.SEEN:
                violations.append(Violation(
                    "related_not_seen", path, f"related task {related_id!r} is not a seen task"
                ))
    return violations


def parse_manifest(doc: dict, policy: ManifestPolicy | None = None) -> Manifest:
    if not isinstance(doc, dict):
        raise SchemaError("/", "manifest must be an object")
    version = _field_str(doc, "version", "")
    domains_raw = _field_list(doc, "domains", "")
    domains = []
    for i, name in enumerate(domains_raw):
        try:
            domains.append(Domain(name))
        except ValueError:
            raise SchemaError(f"/domains/{i}", f"unknown domain {name!r}") from None
    tasks_raw = _field_list(doc, "tasks", "")
    tasks = []
    for i, entry in enumerate(tasks_raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"/tasks/{i}", "expected object")
        tasks.append(_decode_task_spec(entry, f"/tasks/{i}"))
    manifest = Manifest(version=version, domains=tuple(domains), tasks=tuple(tasks))
    violations = validate_manifest(manifest, policy)
    if violations:
        raise IntegrityError(violations)
    return manifest


def load_manifest(path: Path, policy: ManifestPolicy | None = None) -> Manifest:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise SchemaError("/", f"not valid JSON: {err}") from err
    return parse_manifest(doc, policy)


def reference_manifest_path() -> Path:
    return Path(resources.files("procplan").joinpath("data/manifest.json"))


def load_reference_manifest() -> Manifest:
    return load_manifest(reference_manifest_path())


def resolve_caption_sources(task: TaskSpec, manifest: Manifest) -> list[tuple[str, tuple[VideoRef, ...]]]:
    """The two related seen tasks with their video refs, in manifest order."""
    if task.kind is not TaskKind.UNSEEN:
        raise ValueError(f"task {task.id!r} is not an unseen task")
    wanted = set(task.related_seen)
    out = []
    for candidate in manifest.tasks:
        if candidate.id in wanted:
            if candidate.kind is not TaskKind.SEEN:
                raise IntegrityError([Violation(
                    "related_not_seen", "/related_seen", f"{candidate.id!r} is not seen"
                )])
            out.append((candidate.id, candidate.video_refs))
    if len(out) != 2:
        missing = wanted - {task_id for task_id, _ in out}
        raise IntegrityError([Violation(
            "related_missing", "/related_seen", f"missing related tasks: {sorted(missing)}"
        )])
    return out


# ---------------------------------------------------------------------------
# Corpus statistics
# ---------------------------------------------------------------------------

class StatScope(str, Enum):
    TEXT = "Text"
    CONTEXT = "Context"
    VISUAL = "Visual"
    ALL = "All"


class TokenClass(str, Enum):
    WORD = "Word"
    ACTION_VERB = "ActionVerb"


@dataclass(frozen=True)
class FrequencyTable:
    scope: StatScope
    token_class: TokenClass
    entries: tuple[tuple[str, int], ...]

    def to_csv(self) -> str:
        lines = ["token,count"]
        lines.extend(f"{token},{count}" for token, count in self.entries)
        return "\n".join(lines) + "\n"


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("procplan").joinpath(f"data/{name}").read_text(encoding="utf-8")
    return frozenset(word.strip() for word in text.splitlines() if word.strip())


def stopwords() -> frozenset[str]:
    return _load_wordlist("stopwords.txt")


def action_verbs() -> frozenset[str]:
    return _load_wordlist("action_verbs.txt")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    tokens = []
    current = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def _fields_for_scope(plan, scope: StatScope) -> list[str]:
    texts: list[str] = []
    if isinstance(plan, (VanillaTextPlan, GroundedPlan)):
        for step in plan.steps:
            if scope in (StatScope.TEXT, StatScope.ALL):
                texts.append(step.text)
            if scope in (StatScope.CONTEXT, StatScope.ALL):
                texts.append(step.context)
            if scope in (StatScope.VISUAL, StatScope.ALL) and hasattr(step, "visual"):
                texts.append(step.visual)
    else:
        raise TypeError(f"cannot compute stats over {type(plan).__name__}")
    return texts


def corpus_stats(
    plans,
    scope: StatScope = StatScope.ALL,
    token_class: TokenClass = TokenClass.WORD,
    top_k: int = 30,
) -> FrequencyTable:
    """Top-k token frequencies over the given plans.

    Counts are invariant under plan ordering; sorting is by count
    descending, then token ascending, which makes the table total.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    drop = stopwords()
    keep_verbs = action_verbs() if token_class is TokenClass.ACTION_VERB else None
    counts: Counter = Counter()
    for plan in plans:
        for text in _fields_for_scope(plan, scope):
            for token in tokenize(text):
                if token in drop:
                    continue
                if keep_verbs is not None and token not in keep_verbs:
                    continue
                counts[token] += 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return FrequencyTable(scope=scope, token_class=token_class, entries=tuple(ordered))
