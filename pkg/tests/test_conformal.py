import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coco_cp.conformal import (
    QuantileCalibration,
    bonferroni_levels,
    calibrate_quantile,
    label_set,
    per_concept_set,
    score,
)
from coco_cp.errors import EmptyCalibration
from coco_cp.synthio import PredictorSpec, generate


def test_score_examples():
    assert score(1.0) == 0.0
    assert score(math.exp(-2)) == pytest.approx(2.0)
    assert score(0.0) == pytest.approx(27.631, abs=1e-3)


def test_quantile_examples():
    assert calibrate_quantile([0.1, 0.2, 0.3, 0.4], 0.25) == 0.4
    assert calibrate_quantile([1, 2, 3, 4], 0.1) == math.inf
    assert calibrate_quantile(np.arange(9, 0, -1), 0.1) == 9


def test_quantile_errors():
    with pytest.raises(EmptyCalibration):
        calibrate_quantile([], 0.1)
    with pytest.raises(ValueError):
        calibrate_quantile([1.0], 1.5)


def test_label_set_examples():
    assert label_set([0.7, 0.2, 0.1], math.inf) == frozenset({0, 1, 2})
    assert label_set([0.7, 0.2, 0.1], score(0.2)) == frozenset({0, 1})
    assert label_set([0.0, 1.0, 0.0], 0.0) == frozenset({1})


def test_concept_set_examples():
    assert 3 in per_concept_set(np.eye(10)[3], 0.5)
    assert per_concept_set(np.full(10, 0.1), score(0.1)) == frozenset(range(10))
    assert per_concept_set([0.5, 0.3, 0.2], score(0.3)) == frozenset({0, 1})


def test_bonferroni():
    assert bonferroni_levels(0.1, 2) == (0.05, 0.05)


def test_ties_survive_float_noise():
    p = np.array([0.5, 0.5 * (1 + 1e-15), 0.0])
    assert label_set(p, score(0.5)) == frozenset({0, 1})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=60), st.floats(0.01, 0.99))
def test_quantile_rank(scores, level):
    q = calibrate_quantile(scores, level)
    n = len(scores)
    r = math.ceil(round((n + 1) * (1 - level), 9))
    if r > n:
        assert q == math.inf
    else:
        assert sum(s <= q for s in scores) >= r
        assert sum(s < q for s in scores) < r


def test_marginal_coverage_exchangeable(digit_sum):
    covs = []
    for s in range(5):
        cal, test = generate(digit_sum, PredictorSpec(tau=1.0, sigma=1.0), 500, 2000, seed=s)
        qc = QuantileCalibration.fit(cal, 0.1, 0.1)
        covs.append(qc.label_masks(test)[np.arange(len(test)), test.y_star].mean())
    assert 0.87 <= np.mean(covs) <= 0.93


def test_calibration_roundtrip(digit_sum):
    cal, _ = generate(digit_sum, PredictorSpec(tau=1.0, sigma=1.0), 5, 5, seed=0)
    qc = QuantileCalibration.fit(cal, 0.1, 0.1)
    assert qc.q_label == math.inf
    assert QuantileCalibration.from_dict(qc.to_dict()) == qc
