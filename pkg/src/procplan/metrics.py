"""Automatic evaluation metrics.

Sentence-level BLEU with optional add-one smoothing, a METEOR-style score
with exact+stem matching only ("METEOR-lite"), win/tie/lose preference
aggregation with half-up percentage rounding, and frame-sampled mean
similarity (MSS) against a pluggable scorer.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from enum import Enum
from typing import Callable, Iterable, Sequence

from .stemming import porter_stem


class MetricError(Exception):
    pass


class EmptyReference(MetricError):
    pass


class EmptyInput(MetricError):
    pass


class EmptySample(MetricError):
    pass


class NoFrames(MetricError):
    pass


class Aspect(str, Enum):
    """The four pairwise-comparison aspects."""

    TEXTUAL_INFORMATIVE = "TextualInformative"
    VISUAL_INFORMATIVE = "VisualInformative"
    TEMPORAL_COHERENCE = "TemporalCoherence"
    PLAN_ACCURACY = "PlanAccuracy"


class Verdict(str, Enum):
    WIN_A = "WinA"
    TIE = "Tie"
    WIN_B = "WinB"


class Smoothing(str, Enum):
    NONE = "None"
    ADD_ONE = "AddOne"


@dataclass(frozen=True)
class BleuConfig:
    max_n: int = 4
    smoothing: Smoothing = Smoothing.ADD_ONE

    def __post_init__(self):
        if not 1 <= self.max_n <= 9:
            raise ValueError("max_n must be within 1..9")


@dataclass(frozen=True)
class MeteorConfig:
    alpha: float = 0.9
    beta: float = 3.0
    gamma: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")


@dataclass(frozen=True)
class PreferenceTally:
    aspect: Aspect
    win: int = 0
    tie: int = 0
    lose: int = 0

    @property
    def total(self) -> int:
        return self.win + self.tie + self.lose


_STANDARD_FRAME_RATES = (5, 10, 15, 20)


@dataclass
class MssConfig:
    frame_rate: int = 20
    sampling: str = "stride"  # "stride": 1 frame per frame_rate source frames; "fps": frames per second
    source_fps: float = 30.0
    concurrency: int = 1
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.frame_rate < 1:
            raise ValueError("frame_rate must be >= 1")
        if self.frame_rate not in _STANDARD_FRAME_RATES:
            self.warnings.append(
                f"frame_rate {self.frame_rate} outside the standard set {_STANDARD_FRAME_RATES}"
            )
        if self.sampling not in ("stride", "fps"):
            raise ValueError("sampling must be 'stride' or 'fps'")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: Sequence[str],
    references: Iterable[Sequence[str]],
    config: BleuConfig | None = None,
) -> float:
    """Geometric mean of clipped n-gram precisions times brevity penalty.

    Orders beyond the candidate length are skipped (effective order), so a
    short candidate against itself still scores 1. AddOne smoothing adds 1
    to the numerator and denominator of orders with zero matches only.
    """
    config = config or BleuConfig()
    references = [list(r) for r in references]
    if not references or any(len(r) == 0 for r in references):
        raise EmptyReference("at least one nonempty reference is required")
    candidate = list(candidate)
    if not candidate:
        return 0.0

    effective_max = min(config.max_n, len(candidate))
    log_sum = 0.0
    for n in range(1, effective_max + 1):
        cand_counts = _ngram_counts(candidate, n)
        matches = 0
        for gram, count in cand_counts.items():
            best = max(_ngram_counts(ref, n).get(gram, 0) for ref in references)
            matches += min(count, best)
        total = sum(cand_counts.values())
        if matches == 0:
            if config.smoothing is Smoothing.ADD_ONE:
                matches, total = 1, total + 1
            else:
                return 0.0
        log_sum += math.log(matches / total)

    c = len(candidate)
    r = min((len(ref) for ref in references), key=lambda L: (abs(L - c), L))
    brevity = 1.0 if c > r else math.exp(1 - r / c)
    return brevity * math.exp(log_sum / effective_max)


# ---------------------------------------------------------------------------
# METEOR-lite
# ---------------------------------------------------------------------------

def _stage_match(
    cand: list[str],
    ref: list[str],
    cand_free: list[bool],
    ref_free: list[bool],
    key: Callable[[str], str],
    alignment: dict[int, int],
) -> None:
    """Greedy one-to-one matching; prefers the reference slot adjacent to the
    previous match so contiguous phrases align into single chunks."""
    last_j = -2
    for i, token in enumerate(cand):
        if not cand_free[i]:
            last_j = alignment.get(i, last_j)
            continue
        want = key(token)
        choices = [j for j in range(len(ref)) if ref_free[j] and key(ref[j]) == want]
        if not choices:
            continue
        j = next((j for j in choices if j == last_j + 1), choices[0])
        alignment[i] = j
        cand_free[i] = False
        ref_free[j] = False
        last_j = j


def meteor(
    candidate: Sequence[str],
    reference: Sequence[str],
    config: MeteorConfig | None = None,
) -> float:
    """Unigram F-mean with a fragmentation penalty; exact then stem matching.

    Matching is case-insensitive; each token participates in at most one
    match. Zero matches score 0.
    """
    config = config or MeteorConfig()
    cand = [t.lower() for t in candidate]
    ref = [t.lower() for t in reference]
    if not cand or not ref:
        raise EmptyInput("candidate and reference must be nonempty")

    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)
    alignment: dict[int, int] = {}
    _stage_match(cand, ref, cand_free, ref_free, lambda t: t, alignment)
    _stage_match(cand, ref, cand_free, ref_free, porter_stem, alignment)

    m = len(alignment)
    if m == 0:
        return 0.0

    pairs = sorted(alignment.items())
    chunks = 1
    for (i1, j1), (i2, j2) in zip(pairs, pairs[1:]):
        if i2 != i1 + 1 or j2 != j1 + 1:
            chunks += 1

    precision = m / len(cand)
    recall = m / len(ref)
    f_mean = (precision * recall) / (
        config.alpha * precision + (1 - config.alpha) * recall
    )
    penalty = config.gamma * (chunks / m) ** config.beta
    return f_mean * (1 - penalty)


# ---------------------------------------------------------------------------
# Preference aggregation
# ---------------------------------------------------------------------------

def _pct(count: int, total: int) -> Decimal:
    return (Decimal(count) * 100 / Decimal(total)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP
    )


def percentages_from_counts(win: int, tie: int, lose: int) -> tuple[Decimal, Decimal, Decimal]:
    """(win%, tie%, lose%) rounded half-up to 2 decimals; no renormalization."""
    total = win + tie + lose
    if total < 1:
        raise EmptySample("no judgments to aggregate")
    return _pct(win, total), _pct(tie, total), _pct(lose, total)


def aggregate_preferences(judgments) -> dict[Aspect, tuple[Decimal, Decimal, Decimal]]:
    """Per-aspect (win%, tie%, lose%) for one ordered comparison pair.

    Win counts side A (the grounded arm by convention); judgments are
    objects with ``aspect`` and ``verdict`` attributes.
    """
    tallies: dict[Aspect, Counter] = {}
    for judgment in judgments:
        aspect = Aspect(judgment.aspect)
        tallies.setdefault(aspect, Counter())[Verdict(judgment.verdict)] += 1
    out = {}
    for aspect, counts in tallies.items():
        out[aspect] = percentages_from_counts(
            counts[Verdict.WIN_A], counts[Verdict.TIE], counts[Verdict.WIN_B]
        )
    return out


def tally_percentages(tally: PreferenceTally) -> tuple[Decimal, Decimal, Decimal]:
    return percentages_from_counts(tally.win, tally.tie, tally.lose)


# ---------------------------------------------------------------------------
# Mean similarity score
# ---------------------------------------------------------------------------

def sample_frames(frames: Sequence, config: MssConfig) -> list:
    """Uniform decimation of the source frame list per the configured rule."""
    if config.sampling == "stride":
        stride = config.frame_rate
    else:
        stride = max(1, round(config.source_fps / config.frame_rate))
    return list(frames[::stride])


def mss(
    artifact_ref: str,
    prompt: str,
    config: MssConfig,
    scorer: Callable[[str, str], float],
    frame_source: Callable[[str], Sequence],
) -> float:
    """Mean image-text similarity over sampled frames of one artifact.

    ``frame_source`` yields the artifact's ordered source frame refs;
    ``scorer(frame_ref, prompt)`` returns a similarity. The mean uses exact
    rational accumulation, so it is order-independent and bounded by the
    per-frame extrema.
    """
    frames = sample_frames(list(frame_source(artifact_ref)), config)
    if not frames:
        raise NoFrames(f"no frames sampled from {artifact_ref!r}")
    if config.concurrency > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            scores = list(pool.map(lambda frame: scorer(frame, prompt), frames))
    else:
        scores = [scorer(frame, prompt) for frame in frames]
    return statistics.mean(scores)


def format_mss(value: float) -> str:
    """Report formatting: 9 decimal places."""
    return f"{value:.9f}"


def export_metric_rows(rows: Iterable[tuple[str, str, str, float]]) -> str:
    """CSV "task_id,arm,metric,value" at full precision."""
    lines = ["task_id,arm,metric,value"]
    for task_id, arm, metric, value in rows:
        lines.append(f"{task_id},{arm},{metric},{value!r}")
    return "\n".join(lines) + "\n"
