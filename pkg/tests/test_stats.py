import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from amreval.metrics import MetricId, MetricScore
from amreval.stats import (
    EvalCorpus,
    CorpusItem,
    HumanJudgments,
    ScoreTable,
    StatsError,
    UnsupportedAggregation,
    acceptability_delta,
    acceptability_rate,
    binomial_test,
    bootstrap_ci,
    corpus_score_macro,
    corpus_score_micro,
    length_buckets,
    macro_mean,
    pa_statistic,
    pairwise_accuracy,
    preference_counts,
    preference_test,
    read_judgments,
    spearman,
    spearman_matrix,
    write_buckets_csv,
)
from oracles import synthetic_pa_data


def exact_binomial_two_sided(wins: int, n: int) -> float:
    """Sum of outcome probabilities no larger than the observed one, in exact arithmetic."""
    probs = [Fraction(math.comb(n, k), 2**n) for k in range(n + 1)]
    observed = probs[wins]
    return float(min(Fraction(1), sum(p for p in probs if p <= observed)))


def _table(rows):
    entries = {}
    ids = []
    for metric, parser, item, score in rows:
        entries[(metric, parser, item)] = score
        if item not in ids:
            ids.append(item)
    return ScoreTable(entries, ids)


def _smatch(m, c, r):
    f = 2 * m / (c + r)
    return MetricScore(MetricId.SMATCH, f, matched=m, candidate_total=c, reference_total=r)


def test_macro_examples():
    assert macro_mean([0.5, 0.7]) == pytest.approx(0.6)
    assert macro_mean([1.0, 1.0]) == 1.0
    assert acceptability_rate([1, 1, 0, 1, 0]) == pytest.approx(0.6)
    with pytest.raises(StatsError):
        macro_mean([])


def test_micro_pooling_example():
    t = _table([(MetricId.SMATCH, "p", "i1", _smatch(1, 2, 2)), (MetricId.SMATCH, "p", "i2", _smatch(3, 4, 4))])
    assert corpus_score_micro(t, MetricId.SMATCH, "p") == pytest.approx(4 / 6)
    assert corpus_score_macro(t, MetricId.SMATCH, "p") == pytest.approx((0.5 + 0.75) / 2)


def test_micro_single_pair_equals_pair_score():
    t = _table([(MetricId.SMATCH, "p", "i1", _smatch(3, 7, 5))])
    assert abs(corpus_score_micro(t, MetricId.SMATCH, "p") - corpus_score_macro(t, MetricId.SMATCH, "p")) < 1e-12


def test_micro_unsupported_for_kernels():
    t = _table([(MetricId.WLK_K2, "p", "i1", MetricScore(MetricId.WLK_K2, 0.5))])
    with pytest.raises(UnsupportedAggregation):
        corpus_score_micro(t, MetricId.WLK_K2, "p")


def test_preference_examples():
    assert preference_counts([0.9, 0.5], [0.1, 0.5]) == (1.5, 0.5)
    assert preference_counts([0.3] * 10, [0.3] * 10) == (5, 5)
    assert preference_counts([1.0] * 200, [0.0] * 200) == (200, 0)


@given(st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 1.0]), st.sampled_from([0.0, 0.25, 0.5, 1.0])),
                min_size=1, max_size=50))
def test_preference_conservation(pairs):
    a, b = zip(*pairs)
    pa, pb = preference_counts(a, b)
    assert pa + pb == len(pairs)


def test_pairwise_accuracy_examples():
    assert pairwise_accuracy([1, 2, -1, -3], [1, 1, -1, -1]) == 1.0
    assert pairwise_accuracy([1, -2], [-1, 1]) == 0.0
    assert pairwise_accuracy([0.1, 0.2, -0.3, 0.0, -0.5], [1, 1, -1, 1, 1]) == pytest.approx(0.6)
    assert pairwise_accuracy([5.0, 1.0], [0, 1]) == 1.0  # unlabeled item ignored
    with pytest.raises(StatsError):
        pairwise_accuracy([1.0], [0])


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=40))
def test_self_consistent_pairwise_accuracy(deltas):
    human = [int(np.sign(d)) for d in deltas]
    if any(human):
        assert pairwise_accuracy(deltas, human) == 1.0


def test_acceptability_delta_examples():
    assert acceptability_delta([0.1, 0.2, 0.9, 1.0], [0, 0, 1, 1]) == 2.0
    assert acceptability_delta([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.0
    with pytest.raises(StatsError):
        acceptability_delta([0.1, 0.2], [1, 1])


def test_acceptability_delta_near_zero_for_independent_labels():
    rng = np.random.default_rng(8)
    scores, labels = rng.uniform(size=2000), rng.integers(0, 2, 2000)
    lo, hi = bootstrap_ci(lambda r: acceptability_delta(r[:, 0], r[:, 1]), np.column_stack([scores, labels]),
                          B=300, seed=1)
    assert lo <= 0.0 <= hi


def test_spearman_examples():
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    x = [0.3, 0.1, 0.9, 0.4]
    assert spearman(x, x) == 1.0
    assert spearman(x, np.exp(x)) == 1.0
    assert math.isnan(spearman([1, 1, 1], [1, 2, 3]))
    with pytest.raises(StatsError):
        spearman([1, 2], [1, 2])


@settings(max_examples=80)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=30))
def test_spearman_matches_scipy(pairs):
    x, y = (np.array(v, dtype=float) for v in zip(*pairs))
    ours = spearman(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        assert math.isnan(ours)
    else:
        assert ours == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)


def test_spearman_matrix_structure():
    rng = np.random.default_rng(0)
    cols = {"a": rng.uniform(size=10), "b": rng.uniform(size=10), "c": np.ones(10)}
    names, mat = spearman_matrix(cols)
    assert names == ["a", "b", "c"]
    assert mat[0, 0] == mat[1, 1] == 1.0
    assert mat[0, 1] == mat[1, 0]
    assert np.isnan(mat[2]).all() and np.isnan(mat[:, 2]).all()


@pytest.mark.parametrize("wins, n", [(113, 200), (10, 10), (5, 10), (0, 7), (3, 9)])
def test_binomial_matches_exact_sum(wins, n):
    assert binomial_test(wins, n) == pytest.approx(exact_binomial_two_sided(wins, n), rel=1e-9)


def test_binomial_reference_values():
    assert binomial_test(113, 200) == pytest.approx(0.0768, abs=5e-5)
    assert binomial_test(10, 10) == pytest.approx(2 * 0.5**10)
    assert binomial_test(5, 10) == 1.0
    with pytest.raises(StatsError):
        binomial_test(0, 0)


def test_preference_test_modes():
    a, b = [1, 1, 1, 0.5, 0.5], [0, 0, 0, 0.5, 0.5]
    split = preference_test(a, b, "split")
    excl = preference_test(a, b, "exclude")
    assert (split["wins"], split["n"]) == (4, 5)
    assert (excl["wins"], excl["n"]) == (3, 3)
    assert excl["p_value"] == pytest.approx(0.25)


def test_bootstrap_examples():
    lo, hi = bootstrap_ci(lambda r: float(np.mean(r)), np.full(20, 0.3), B=100)
    assert lo == hi == pytest.approx(0.3, abs=1e-12)
    perfect = np.column_stack([np.ones(30), np.ones(30)])
    assert bootstrap_ci(pa_statistic, perfect, B=100) == (1.0, 1.0)
    data = np.random.default_rng(1).normal(size=50)
    assert bootstrap_ci(np.mean, data, seed=4) == bootstrap_ci(np.mean, data, seed=4)
    assert bootstrap_ci(np.mean, data, seed=4) != bootstrap_ci(np.mean, data, seed=5)


@pytest.mark.parametrize("seed", range(5))
def test_bootstrap_random_labels_cover_half(seed):
    rng = np.random.default_rng(100 + seed)
    deltas, human = rng.normal(size=120), rng.choice([-1.0, 1.0], size=120)
    lo, hi = bootstrap_ci(pa_statistic, np.column_stack([deltas, human]), B=500, seed=seed)
    assert lo <= 0.5 <= hi


def test_bootstrap_synthetic_pa():
    deltas, human = synthetic_pa_data(np.random.default_rng(2), 200, 0.7)
    assert pairwise_accuracy(deltas, human) == pytest.approx(0.7)
    lo, hi = bootstrap_ci(pa_statistic, np.column_stack([deltas, human]), B=1000, seed=0)
    assert lo > 0.5
    assert abs((hi - lo) / 2 - 1.96 * math.sqrt(0.7 * 0.3 / 200)) < 0.015


def test_length_bucket_examples(tmp_path):
    assert length_buckets(["a b c", "x y z"], [1.0, 0.0]) == [(3, 0.5, 2)]
    long = " ".join(["w"] * 90)
    rows = length_buckets([" ".join(["w"] * 10), " ".join(["w"] * 55), long], [1, 1, 1])
    assert [r[0] for r in rows] == [10, 55]
    assert [r[2] for r in rows] == [1, 2]
    assert length_buckets(["a", "a b", "a b c"], [0.4] * 3) == [(1, 0.4, 1), (2, 0.4, 1), (3, 0.4, 1)]
    trend = length_buckets(["a", "a", "a b c d e f", "a b c d e f g h i j k l"], [1, 1, 0, 0])
    means = [m for _, m, _ in trend]
    assert means == sorted(means, reverse=True)
    write_buckets_csv(rows, tmp_path / "b.csv", "smatch")
    assert (tmp_path / "b.csv").read_text().splitlines() == ["bucket,smatch,count", "10,1.0000,1", "55,1.0000,2"]


def test_judgment_files(tmp_path, fixtures):
    j = read_judgments(fixtures / "demo" / "prefs.tsv", fixtures / "demo" / "accept.tsv")
    assert j.preferences["d1"] == 1 and j.acceptability[("d3", "a")] == 0
    assert j.rationales["d2"] == "both acceptable readings"
    bad = tmp_path / "p.tsv"
    bad.write_text("id\tlabel\nx\t2\n", encoding="utf-8")
    with pytest.raises(StatsError):
        read_judgments(bad, None)
    noheader = tmp_path / "q.tsv"
    noheader.write_text("", encoding="utf-8")
    with pytest.raises(StatsError):
        read_judgments(noheader, None)


def test_corpus_invariants():
    from amreval.penman import parse_penman

    g = parse_penman("(a / b)")
    with pytest.raises(StatsError):
        EvalCorpus([CorpusItem("x", "", g, {"p": g}), CorpusItem("x", "", g, {"p": g})])
    with pytest.raises(StatsError):
        EvalCorpus([CorpusItem("x", "", g, {"p": g}), CorpusItem("y", "", g, {"q": g})]).parsers
    with pytest.raises(StatsError):
        HumanJudgments({"x": 2}, {}, {})
