import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coco_cp.errors import DimensionMismatch, InfeasiblePrior, InvalidProgram, ParseError, SupportViolation
from coco_cp.knowledge import ActiveCount, DigitSum, compile_program, marginal_label_distributions, table_from_weights
from coco_cp.synthio import PredictorSpec, generate, ingest, parity_preserving_shift, split, write_records


def test_tau_zero_is_one_hot_at_truth(digit_sum):
    cal, test = generate(digit_sum, PredictorSpec(tau=0.0), 50, 50, seed=0)
    for j in range(2):
        assert np.all(test.concept_probs[j].argmax(axis=1) == test.c_star[:, j])
        assert np.all(test.concept_probs[j].max(axis=1) == 1.0)


def test_large_tau_is_near_uniform(digit_sum):
    _, test = generate(digit_sum, PredictorSpec(tau=1e6), 10, 200, seed=0)
    np.testing.assert_allclose(test.concept_probs[0], 0.1, atol=1e-5)


def test_parity_shortcut(sum_parity):
    pi = parity_preserving_shift(10)
    assert sorted(pi) == list(range(10)) and all(v % 2 == pi[v] % 2 for v in range(10))
    fixed = sum(pi[v] == v for v in range(10)) / 10
    _, test = generate(sum_parity, PredictorSpec(tau=0.25, shortcut=pi), 10, 2000, seed=0)
    assert np.mean(test.label_probs.argmax(axis=1) == test.y_star) == 1.0
    acc = np.mean([test.concept_probs[j].argmax(axis=1) == test.c_star[:, j] for j in range(2)])
    assert acc == fixed


def test_label_probs_are_marginals(digit_sum):
    _, test = generate(digit_sum, PredictorSpec(tau=0.7, sigma=0.5), 10, 30, seed=3)
    np.testing.assert_allclose(test.label_probs, marginal_label_distributions(test.concept_probs, digit_sum))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5000))
def test_generation_is_deterministic(seed, n):
    kt = compile_program(ActiveCount(3))
    spec = PredictorSpec(tau=0.5, sigma=1.0)
    a = generate(kt, spec, 1, n, seed=seed)[1]
    b = generate(kt, spec, 1, n, seed=seed)[1]
    c = generate(kt, spec, 1, n, seed=seed + 1)[1]
    np.testing.assert_array_equal(a.concept_probs[0], b.concept_probs[0])
    np.testing.assert_array_equal(a.y_star, b.y_star)
    assert not np.array_equal(a.concept_probs[0], c.concept_probs[0])


def test_infeasible_prior():
    kt = table_from_weights((2,), [[1.0], [0.0]])
    with pytest.raises(InfeasiblePrior):
        generate(kt, PredictorSpec(), 5, 5)
    cal, _ = generate(kt, PredictorSpec(prior="feasible"), 20, 5)
    assert np.all(cal.c_star[:, 0] == 0)


def test_bad_shortcut():
    kt = compile_program(DigitSum(2, 4))
    with pytest.raises(InvalidProgram):
        generate(kt, PredictorSpec(shortcut=(0, 0, 1, 2)), 5, 5)


def test_split_default_fraction(digit_sum):
    cal, test = generate(digit_sum, PredictorSpec(), 1, 99, seed=0)
    from coco_cp.records import RecordBatch
    c, t = split(RecordBatch.concat([cal, test]))
    assert (len(c), len(t)) == (20, 80)


def test_roundtrip(tmp_path, digit_sum):
    cal, _ = generate(digit_sum, PredictorSpec(tau=0.5, sigma=1.0), 20, 1, seed=1)
    path = tmp_path / "r.jsonl"
    write_records(cal, path)
    first = json.loads(path.read_text().splitlines()[0])
    assert list(first) == ["id", "concept_probs", "label_probs", "c_star", "y_star"]
    back = ingest(path, digit_sum, strict=True)
    assert back.ids == cal.ids
    np.testing.assert_array_equal(back.c_star, cal.c_star)
    np.testing.assert_allclose(back.label_probs, cal.label_probs)


def test_missing_label_probs_filled(tmp_path, digit_sum):
    cal, _ = generate(digit_sum, PredictorSpec(tau=0.5, sigma=1.0), 5, 1, seed=2)
    path = tmp_path / "r.jsonl"
    write_records(cal, path, include_label_probs=False)
    np.testing.assert_allclose(ingest(path, digit_sum).label_probs, cal.label_probs)


def _line(**kw):
    rec = {"id": "a", "concept_probs": [[1.0] + [0.0] * 9] * 2, "c_star": [0, 0], "y_star": 0}
    rec.update(kw)
    return json.dumps(rec) + "\n"


def test_ingest_errors(tmp_path, digit_sum):
    p = tmp_path / "r.jsonl"
    p.write_text(_line() + "{not json\n")
    with pytest.raises(ParseError) as exc:
        ingest(p, digit_sum)
    assert exc.value.line == 2
    p.write_text(_line(concept_probs=[[1.0] + [0.0] * 9]))
    with pytest.raises(DimensionMismatch):
        ingest(p, digit_sum)
    p.write_text(_line(y_star=5))
    assert len(ingest(p, digit_sum)) == 1
    with pytest.raises(SupportViolation):
        ingest(p, digit_sum, strict=True)
    p.write_text(_line(concept_probs=[[0.5] * 10] * 2))
    with pytest.raises(ParseError):
        ingest(p, digit_sum)
