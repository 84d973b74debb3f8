import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coco_cp.errors import EmptyDataset
from coco_cp.metrics import (
    EvaluationReport,
    abduction_bounds,
    consistency,
    coverage,
    deduction_bounds,
    evaluate_method,
    joint_failure_concept,
    joint_failure_label,
    mean_size,
    record_consistency,
    summarize,
    theoretical_bounds,
)
from coco_cp.revision import PredictionSets
from coco_cp.sets import ConceptSet


def _pred(kt, labels, concepts):
    return PredictionSets(frozenset(labels), ConceptSet.from_vectors(kt.concept_space, concepts), "raw")


def test_coverage_examples():
    assert coverage([{1}, {2}], [1, 2]) == 1.0
    assert coverage([set(), set()], [1, 2]) == 0.0
    assert coverage([{1}, {3}], [1, 2]) == 0.5
    with pytest.raises(EmptyDataset):
        coverage([], [])


def test_size_examples():
    assert mean_size([{1}, {2}]) == 1.0
    assert mean_size([set(), set()]) == 0.0
    assert mean_size([{1}, {1, 2, 3}]) == 2.0


def test_consistency_examples(digit_sum):
    assert record_consistency(_pred(digit_sum, {5}, []), digit_sum, "concepts") == 0.0
    assert record_consistency(_pred(digit_sum, {5}, [(2, 3)]), digit_sum, "concepts") == 1.0
    p = _pred(digit_sum, {5, 9}, [(2, 3), (4, 4)])
    assert record_consistency(p, digit_sum, "concepts") == 0.5
    assert record_consistency(p, digit_sum, "labels") == 0.5
    assert consistency([p, _pred(digit_sum, {5}, [(2, 3)])], digit_sum) == 0.75


def test_bound_examples():
    assert theoretical_bounds(0.1, 0.1, 1.0, 0.8).label == pytest.approx(0.62)
    b = theoretical_bounds(0.1, 0.1, 1.0, 1.0)
    assert b.label == pytest.approx(0.8) and b.concept == pytest.approx(0.8)
    assert theoretical_bounds(0.1, 0.1, 1.0, 0.8, joint_failure_label=0.06).label == pytest.approx(0.68)


def test_bounds_clamped_but_raw_kept():
    b = theoretical_bounds(0.9, 0.9, 0.1, 0.1)
    assert b.label == 0.0 and b.label_raw < 0
    with pytest.raises(ValueError):
        theoretical_bounds(0.1, 0.1, 1.2, 1.0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_one_sided_bounds_ordered(level, delta):
    lo, hi = abduction_bounds(level, delta)
    assert lo <= hi
    lo, hi = deduction_bounds(level, delta)
    assert lo <= hi


def test_joint_failures(digit_sum):
    raw = [_pred(digit_sum, {5}, [(1, 1)]), _pred(digit_sum, {9}, [(1, 1)])]
    assert joint_failure_label(raw, [2, 5], digit_sum) == 0.5
    assert joint_failure_concept(raw, [(2, 2), (1, 1)], digit_sum) == 0.5
    assert joint_failure_concept(raw, [(2, 3), (1, 1)], digit_sum) == 0.0


def test_report_roundtrip(digit_sum):
    preds = [_pred(digit_sum, {5}, [(2, 3)]), _pred(digit_sum, {8}, [(4, 4), (0, 0)])]
    rep = evaluate_method(preds, [5, 8], [(2, 3), (4, 4)], digit_sum)
    assert rep.labels.coverage == 1.0 and rep.concepts.size == 1.5
    assert rep.concepts.consistency == 0.75
    back = EvaluationReport.from_dict(rep.to_dict())
    assert back.labels == rep.labels and back.method == "raw"


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_summarize(values):
    mu, sd = summarize(values + [math.nan])
    assert mu == pytest.approx(np.mean(values))
    assert sd == pytest.approx(np.std(values), abs=1e-12)
