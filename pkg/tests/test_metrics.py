"""Metric arithmetic against independent oracles and frozen closed forms.

Expected values were computed before the implementation existed:
METEOR closed forms with an exact-fraction scorer (431/432 and 265/351),
the BLEU clipping fixture by hand count, and the percentage rows with
decimal arithmetic.
"""

from __future__ import annotations

import itertools
import math
import random
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from procplan.metrics import (
    Aspect,
    BleuConfig,
    EmptyInput,
    EmptyReference,
    EmptySample,
    MeteorConfig,
    MssConfig,
    NoFrames,
    PreferenceTally,
    Smoothing,
    Verdict,
    aggregate_preferences,
    bleu,
    format_mss,
    meteor,
    mss,
    percentages_from_counts,
    sample_frames,
    tally_percentages,
)
from procplan.stemming import porter_stem

NO_SMOOTHING = BleuConfig(smoothing=Smoothing.NONE)


# --- independent brute-force oracle (kept free of the implementation) -------

def oracle_bleu(candidate, references, max_n, smoothing_add_one):
    if not candidate:
        return 0.0
    effective = min(max_n, len(candidate))
    precisions = []
    for n in range(1, effective + 1):
        cgrams = [tuple(candidate[i:i + n]) for i in range(len(candidate) - n + 1)]
        matched = 0
        for gram in set(cgrams):
            in_cand = sum(1 for g in cgrams if g == gram)
            best_ref = 0
            for ref in references:
                rgrams = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
                best_ref = max(best_ref, sum(1 for g in rgrams if g == gram))
            matched += min(in_cand, best_ref)
        total = len(cgrams)
        if matched == 0:
            if smoothing_add_one:
                matched, total = 1, total + 1
            else:
                return 0.0
        precisions.append(matched / total)
    geo = math.exp(sum(math.log(p) for p in precisions) / effective)
    c = len(candidate)
    best = None
    for ref in references:
        d = abs(len(ref) - c)
        if best is None or d < best[0] or (d == best[0] and len(ref) < best[1]):
            best = (d, len(ref))
    r = best[1]
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * geo


class TestBleu:
    def test_identity_scores_one_without_smoothing(self):
        x = "fill the pot with water".split()
        assert bleu(x, [x], NO_SMOOTHING) == pytest.approx(1.0, abs=1e-12)

    def test_short_identity_still_one(self):
        x = ["mix"]
        assert bleu(x, [x], NO_SMOOTHING) == pytest.approx(1.0, abs=1e-12)

    def test_clipping_fixture(self):
        score = bleu(
            "the the the the".split(),
            ["the cat sat down".split()],
            BleuConfig(max_n=1, smoothing=Smoothing.NONE),
        )
        assert score == pytest.approx(0.25, abs=1e-12)

    def test_empty_candidate_is_zero(self):
        assert bleu([], [["a"]], NO_SMOOTHING) == 0.0

    def test_empty_reference_raises(self):
        with pytest.raises(EmptyReference):
            bleu(["a"], [])
        with pytest.raises(EmptyReference):
            bleu(["a"], [[]])

    def test_oracle_equivalence_100_random_pairs(self):
        rng = random.Random(20240811)
        vocab = ["add", "pour", "mix", "stir", "cut", "heat", "cool", "serve"]
        for _ in range(100):
            cand = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
            refs = [
                [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
                for _ in range(rng.randint(1, 3))
            ]
            for smoothing in (Smoothing.NONE, Smoothing.ADD_ONE):
                got = bleu(cand, refs, BleuConfig(max_n=4, smoothing=smoothing))
                want = oracle_bleu(cand, refs, 4, smoothing is Smoothing.ADD_ONE)
                assert got == pytest.approx(want, abs=1e-9)

    def test_matched_pair_constant_across_orders(self):
        x = "wash core slice juice strain serve".split()
        scores = [bleu(x, [x], BleuConfig(max_n=n, smoothing=Smoothing.NONE)) for n in range(1, 5)]
        assert all(s == pytest.approx(1.0, abs=1e-12) for s in scores)

    def test_bounded_zero_one(self):
        rng = random.Random(7)
        vocab = list("abcdefgh")
        for _ in range(50):
            cand = [rng.choice(vocab) for _ in range(rng.randint(1, 10))]
            ref = [rng.choice(vocab) for _ in range(rng.randint(1, 10))]
            s = bleu(cand, [ref])
            assert 0.0 <= s <= 1.0

    def test_max_n_bounds_enforced(self):
        with pytest.raises(ValueError):
            BleuConfig(max_n=0)
        with pytest.raises(ValueError):
            BleuConfig(max_n=10)


class TestMeteor:
    def test_disjoint_zero(self):
        assert meteor("a b c".split(), "x y z".split()) == 0.0

    def test_worked_example_3_vs_4(self):
        # 265/351, frozen from the exact-fraction oracle
        score = meteor("the cat sat".split(), "the cat sat down".split())
        assert score == pytest.approx(0.75499, abs=1e-5)
        assert score == pytest.approx(265 / 351, abs=1e-12)

    def test_identical_six_tokens(self):
        # 431/432, frozen from the exact-fraction oracle
        x = "fill the kettle with cold water".split()
        score = meteor(x, x)
        assert score == pytest.approx(0.99769, abs=1e-5)
        assert score == pytest.approx(431 / 432, abs=1e-12)

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            meteor([], ["a"])
        with pytest.raises(EmptyInput):
            meteor(["a"], [])

    def test_stem_stage_matches_inflections(self):
        score = meteor("she slices apples".split(), "she sliced apple".split())
        assert score > 0.9  # all three tokens match (exact + 2 stems), one chunk

    def test_identity_at_least_099_for_5_tokens(self):
        for n in range(5, 10):
            x = [f"tok{i}" for i in range(n)]
            assert meteor(x, x) >= 0.99

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MeteorConfig(alpha=1.0)
        with pytest.raises(ValueError):
            MeteorConfig(beta=0)
        with pytest.raises(ValueError):
            MeteorConfig(gamma=1.5)


class TestPorterStemmer:
    @pytest.mark.parametrize(
        "word,stem",
        [
            ("caresses", "caress"), ("ponies", "poni"), ("cats", "cat"),
            ("agreed", "agre"), ("plastered", "plaster"), ("motoring", "motor"),
            ("hopping", "hop"), ("falling", "fall"), ("filing", "file"),
            ("happy", "happi"), ("relational", "relat"), ("conditional", "condit"),
            ("digitizer", "digit"), ("operator", "oper"), ("feudalism", "feudal"),
            ("decisiveness", "decis"), ("hopefulness", "hope"), ("formative", "form"),
            ("adjustable", "adjust"), ("replacement", "replac"), ("adoption", "adopt"),
            ("electrical", "electr"), ("controll", "control"), ("roll", "roll"),
            ("slices", "slice"), ("pouring", "pour"),
        ],
    )
    def test_canonical_examples(self, word, stem):
        assert porter_stem(word) == stem


class _J:
    def __init__(self, aspect, verdict):
        self.aspect = aspect
        self.verdict = verdict


class TestPreferences:
    def test_percentage_row_50_votes(self):
        assert percentages_from_counts(22, 20, 8) == (
            Decimal("44.00"), Decimal("40.00"), Decimal("16.00"),
        )

    def test_percentage_row_14_votes(self):
        assert percentages_from_counts(10, 3, 1) == (
            Decimal("71.43"), Decimal("21.43"), Decimal("7.14"),
        )

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            percentages_from_counts(0, 0, 0)

    def test_rounded_triple_may_not_sum_to_100(self):
        win, tie, lose = percentages_from_counts(1, 1, 1)
        assert win == tie == lose == Decimal("33.33")
        assert win + tie + lose != Decimal("100.00")

    def test_aggregate_from_judgments(self):
        judgments = (
            [_J(Aspect.TEXTUAL_INFORMATIVE, Verdict.WIN_A)] * 22
            + [_J(Aspect.TEXTUAL_INFORMATIVE, Verdict.TIE)] * 20
            + [_J(Aspect.TEXTUAL_INFORMATIVE, Verdict.WIN_B)] * 8
            + [_J(Aspect.PLAN_ACCURACY, Verdict.WIN_A)] * 10
            + [_J(Aspect.PLAN_ACCURACY, Verdict.TIE)] * 3
            + [_J(Aspect.PLAN_ACCURACY, Verdict.WIN_B)] * 1
        )
        out = aggregate_preferences(judgments)
        assert out[Aspect.TEXTUAL_INFORMATIVE] == (
            Decimal("44.00"), Decimal("40.00"), Decimal("16.00"),
        )
        assert out[Aspect.PLAN_ACCURACY] == (
            Decimal("71.43"), Decimal("21.43"), Decimal("7.14"),
        )

    def test_tally_percentages(self):
        tally = PreferenceTally(Aspect.PLAN_ACCURACY, win=10, tie=3, lose=1)
        assert tally_percentages(tally)[0] == Decimal("71.43")


@given(
    st.tuples(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500)).filter(
        lambda t: sum(t) > 0
    )
)
def test_unrounded_percentages_sum_to_100(counts):
    total = sum(counts)
    unrounded = [Fraction(c * 100, total) for c in counts]
    assert sum(unrounded) == 100


class TestMss:
    def test_stub_constant(self):
        config = MssConfig(frame_rate=5)
        value = mss("a.mp4", "prompt", config, lambda f, p: 0.5, lambda a: list(range(10)))
        assert value == 0.5

    def test_hand_arithmetic_exact(self):
        scores = {0: 0.2, 1: 0.4, 2: 0.6}
        config = MssConfig(frame_rate=1)
        value = mss("a.mp4", "p", config, lambda f, p: scores[f], lambda a: [0, 1, 2])
        assert value == 0.4  # exact, not approx

    def test_permutation_invariant(self):
        scores = {0: 0.13, 1: 0.57, 2: 0.29, 3: 0.71}
        config = MssConfig(frame_rate=1)
        results = {
            mss("a", "p", config, lambda f, p: scores[f], lambda a, order=order: list(order))
            for order in itertools.permutations(range(4))
        }
        assert len(results) == 1

    def test_bounded_by_extrema(self):
        scores = {i: 0.1 * i for i in range(8)}
        config = MssConfig(frame_rate=1)
        value = mss("a", "p", config, lambda f, p: scores[f], lambda a: list(range(8)))
        assert min(scores.values()) <= value <= max(scores.values())

    def test_stride_sampling(self):
        assert sample_frames(list(range(100)), MssConfig(frame_rate=20)) == [0, 20, 40, 60, 80]

    def test_fps_sampling(self):
        config = MssConfig(frame_rate=10, sampling="fps", source_fps=30)
        assert sample_frames(list(range(12)), config) == [0, 3, 6, 9]

    def test_no_frames(self):
        with pytest.raises(NoFrames):
            mss("a", "p", MssConfig(frame_rate=5), lambda f, p: 0.5, lambda a: [])

    def test_concurrent_scoring_matches_sequential(self):
        scores = {i: 0.01 * i for i in range(50)}
        sequential = mss(
            "a", "p", MssConfig(frame_rate=1), lambda f, p: scores[f], lambda a: list(range(50))
        )
        concurrent = mss(
            "a", "p", MssConfig(frame_rate=1, concurrency=8),
            lambda f, p: scores[f], lambda a: list(range(50)),
        )
        assert concurrent == sequential

    def test_nonstandard_rate_warns(self):
        config = MssConfig(frame_rate=7)
        assert config.warnings

    def test_report_rounding_nine_decimals(self):
        assert format_mss(0.3188716411111) == "0.318871641"
