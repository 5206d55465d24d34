import math

import numpy as np
import pytest

from utils.exceptions import MetricError, UndefinedRateWarning
from utils.math_utils import MathUtils
from utils.metric_utils import FairnessMetrics


def cells(spec):
    """(a, y, 行数, 陽性判定の数) の並びから pred, y, a を組み立てる。"""
    pred, y, a = [], [], []
    for group, label, n, n_positive in spec:
        pred += [1] * n_positive + [0] * (n - n_positive)
        y += [label] * n
        a += [group] * n
    return np.array(pred), np.array(y), np.array(a)


def test_perfect_predictor():
    y = np.array([0, 1, 1, 0, 1, 0])
    a = np.array([0, 0, 0, 1, 1, 1])
    metrics = FairnessMetrics.metric_set(y, y, a)
    assert metrics.accuracy == 1.0
    assert metrics.balanced_accuracy == 1.0


def test_all_positive_predictor():
    y = np.array([0, 1, 1, 0, 1, 0, 0, 0])
    pred = np.ones_like(y)
    assert FairnessMetrics.balanced_accuracy(pred, y) == pytest.approx(0.5)
    assert FairnessMetrics.accuracy(pred, y) == pytest.approx(np.mean(y))


def test_dpd_example():
    pred = np.array([1, 1, 1, 0, 1, 1, 0, 0])
    a = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    signed, absolute = FairnessMetrics.dpd(pred, a)
    assert signed == pytest.approx(0.25)
    assert absolute == pytest.approx(0.25)
    flipped, _ = FairnessMetrics.dpd(pred, 1 - a)
    assert flipped == pytest.approx(-0.25)


def test_aod_and_eod_example():
    # TPR: 0.6 と 0.4、FPR: 0.1 と 0.2
    pred, y, a = cells([(0, 1, 5, 3), (0, 0, 10, 1), (1, 1, 5, 2), (1, 0, 10, 2)])
    signed, absolute = FairnessMetrics.aod(pred, y, a)
    assert signed == pytest.approx(0.05)
    assert absolute == pytest.approx(0.15)
    assert FairnessMetrics.eod(pred, y, a) == pytest.approx(0.2)

    rates = FairnessMetrics.confusion_rates(pred, y, a)
    assert rates[0].tpr == pytest.approx(0.6)
    assert rates[1].fpr == pytest.approx(0.2)
    assert rates[0].n == 15


def test_score_eod_example():
    scores = np.array([0.3, 0.3, 0.6, 0.6, 0.2, 0.2, 0.8, 0.8])
    y = np.array([0, 0, 1, 1, 0, 0, 1, 1])
    a = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    assert FairnessMetrics.score_eod(scores, y, a) == pytest.approx(0.2)
    assert FairnessMetrics.score_dpd(scores, a) == pytest.approx(-0.05)


def test_constant_scores_have_no_gap():
    y = np.array([0, 1, 0, 1])
    a = np.array([0, 0, 1, 1])
    scores = np.full(4, 0.4)
    assert FairnessMetrics.score_eod(scores, y, a) == 0.0
    assert FairnessMetrics.score_dpd(scores, a) == 0.0


def test_mutual_info_of_identical_variables_is_entropy():
    a = np.arange(100) % 2
    estimate = FairnessMetrics.mutual_info(a.astype(float), a)
    assert estimate.nats == pytest.approx(math.log(2.0), abs=1e-12)
    assert estimate.n == 100
    assert estimate.bins == 20


def test_mutual_info_of_constant_score_is_zero():
    a = np.arange(50) % 2
    assert FairnessMetrics.mutual_info(np.full(50, 0.37), a).nats == 0.0


def test_mutual_info_of_independent_samples_is_small():
    rng = np.random.default_rng(0)
    scores = rng.random(10000)
    a = rng.integers(0, 2, 10000)
    estimate = FairnessMetrics.mutual_info(scores, a)
    assert estimate.nats < 0.005
    assert estimate.bias_bound == pytest.approx(19 / 20000)


def test_mutual_info_requires_enough_samples():
    with pytest.raises(MetricError):
        FairnessMetrics.mutual_info(np.array([0.1, 0.2]), np.array([0, 1]), bins=20)


def test_missing_group_is_an_error():
    pred = np.array([1, 0, 1])
    with pytest.raises(MetricError):
        FairnessMetrics.dpd(pred, np.zeros(3, dtype=int))
    with pytest.raises(MetricError):
        FairnessMetrics.score_eod(np.array([0.2, 0.4, 0.6]), np.array([0, 1, 0]), np.ones(3, dtype=int))


def test_undefined_rate_warns_and_uses_remaining_gap():
    pred, y, a = cells([(0, 1, 2, 1), (0, 0, 2, 1), (1, 0, 4, 1)])
    with pytest.warns(UndefinedRateWarning):
        rates = FairnessMetrics.confusion_rates(pred, y, a)
    assert rates[1].tpr is None
    with pytest.warns(UndefinedRateWarning):
        signed, absolute = FairnessMetrics.aod(pred, y, a)
    assert signed == pytest.approx(0.25)
    assert absolute == pytest.approx(0.25)


def test_metrics_are_invariant_to_row_order():
    rng = np.random.default_rng(7)
    pred = rng.integers(0, 2, 200)
    y = rng.integers(0, 2, 200)
    a = rng.integers(0, 2, 200)
    order = rng.permutation(200)
    original = FairnessMetrics.metric_set(pred, y, a, threshold=0.5).to_dict()
    shuffled = FairnessMetrics.metric_set(pred[order], y[order], a[order], threshold=0.5).to_dict()
    assert shuffled == pytest.approx(original)


def counted_mean(values, y, a, group, label=None):
    """グループ（とラベル）に該当する行の値を1行ずつ数えて平均する。"""
    total, count = 0.0, 0
    for value, yi, ai in zip(values, y, a):
        if ai == group and (label is None or yi == label):
            total += value
            count += 1
    return total / count


def random_small_sample(rng):
    """4〜20行で、(グループ, ラベル) の4つの組がすべて現れる標本。"""
    while True:
        n = int(rng.integers(4, 21))
        a = rng.integers(0, 2, n)
        y = rng.integers(0, 2, n)
        if len(set(zip(a.tolist(), y.tolist()))) == 4:
            return a, y, rng.random(n)


def test_metrics_match_row_by_row_counting():
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        a, y, scores = random_small_sample(rng)
        pred = (scores >= 0.5).astype(int)

        tpr = [counted_mean(pred, y, a, g, 1) for g in (0, 1)]
        fpr = [counted_mean(pred, y, a, g, 0) for g in (0, 1)]
        tpr_gap, fpr_gap = tpr[0] - tpr[1], fpr[0] - fpr[1]
        dpd = counted_mean(pred, y, a, 0) - counted_mean(pred, y, a, 1)
        score_gaps = [counted_mean(scores, y, a, 0, label) - counted_mean(scores, y, a, 1, label) for label in (0, 1)]
        correct = sum(1 for p, label in zip(pred, y) if p == label)

        rates = FairnessMetrics.confusion_rates(pred, y, a)
        for g in (0, 1):
            assert rates[g].tpr == pytest.approx(tpr[g], abs=1e-12)
            assert rates[g].fpr == pytest.approx(fpr[g], abs=1e-12)
        assert FairnessMetrics.dpd(pred, a)[0] == pytest.approx(dpd, abs=1e-12)
        aod_signed, aod_abs = FairnessMetrics.aod(pred, y, a)
        assert aod_signed == pytest.approx((tpr_gap + fpr_gap) / 2, abs=1e-12)
        assert aod_abs == pytest.approx((abs(tpr_gap) + abs(fpr_gap)) / 2, abs=1e-12)
        assert FairnessMetrics.eod(pred, y, a) == pytest.approx(max(abs(tpr_gap), abs(fpr_gap)), abs=1e-12)
        assert FairnessMetrics.score_eod(scores, y, a) == pytest.approx(max(abs(g) for g in score_gaps), abs=1e-12)
        assert FairnessMetrics.accuracy(pred, y) == pytest.approx(correct / len(y), abs=1e-12)


def test_accuracy_of_empty_input_is_an_error():
    with pytest.raises(MetricError):
        FairnessMetrics.accuracy(np.array([]), np.array([]))


def test_mismatched_lengths_are_an_error():
    with pytest.raises(MetricError):
        FairnessMetrics.dpd(np.array([1, 0]), np.array([0, 1, 1]))


def test_summary_of_two_repeats():
    summary = MathUtils.summarize([0.9, 0.8])
    assert summary.mean == pytest.approx(0.85)
    assert summary.sd == pytest.approx(0.0707107, abs=1e-6)
    assert summary.half_width == pytest.approx(0.098, abs=1e-3)
    assert summary.ci_low < summary.mean < summary.ci_high
    assert summary.n == 2


def test_summary_of_single_repeat_has_zero_width():
    summary = MathUtils.summarize([0.42])
    assert summary.sd == 0.0
    assert summary.ci_low == summary.mean == summary.ci_high == 0.42


def test_summary_is_independent_of_order():
    values = [0.1, 0.7, 0.3, 0.9, 0.5]
    assert MathUtils.summarize(values) == MathUtils.summarize(list(reversed(values)))


def test_summary_of_nothing_is_an_error():
    with pytest.raises(ValueError):
        MathUtils.summarize([])
