import numpy as np
import pytest

from coco_cp.errors import ConfigError
from coco_cp.knowledge import ActiveCount, compile_program
from coco_cp.pipeline import CalibrationState, calibrate, predict, prediction_from_record, prediction_record, run_methods
from coco_cp.revision import METHODS
from coco_cp.synthio import PredictorSpec, generate


@pytest.fixture(scope="module")
def split(digit_sum):
    return generate(digit_sum, PredictorSpec(tau=1.0, sigma=1.0), 400, 300, seed=4)


def test_all_methods_report(split, digit_sum):
    cal, test = split
    reps = run_methods(cal, test, digit_sum, METHODS, 0.1, 0.1)
    assert set(reps) == set(METHODS)
    assert reps["coco"].labels.coverage <= reps["raw"].labels.coverage
    assert reps["rpb"].labels.size == reps["coco"].labels.size
    assert reps["coco"].delta_ab == reps["coco"].delta_de == 1.0


def test_workers_do_not_change_output(split, digit_sum):
    cal, test = split
    state = calibrate(cal, "coco", 0.1, 0.1)
    a, _ = predict(state, test, digit_sum, "coco", workers=1, chunk=64)
    b, _ = predict(state, test, digit_sum, "coco", workers=3, chunk=64)
    assert [(p.label_set, p.concept_set) for p in a] == [(p.label_set, p.concept_set) for p in b]


def test_prediction_record_roundtrip(split, digit_sum):
    cal, test = split
    state = calibrate(cal, "raw", 0.1, 0.1)
    preds, _ = predict(state, test.take(np.arange(5)), digit_sum, "raw")
    for p in preds:
        back = prediction_from_record(prediction_record("x", p), digit_sum)
        assert back.label_set == p.label_set and back.concept_set == p.concept_set


def test_state_roundtrip(split):
    cal, _ = split
    for method in ("coco", "coco-star"):
        st = calibrate(cal, method, 0.1, 0.1)
        back = CalibrationState.from_dict(st.to_dict())
        assert back.kind == st.kind and back.quantile == st.quantile and back.evalue == st.evalue


def test_budget_needs_test_split():
    kt = compile_program(ActiveCount(4))
    cal, _ = generate(kt, PredictorSpec(), 30, 5)
    with pytest.raises(ConfigError):
        calibrate(cal, "coco-star", budgets=(2, 5))
    with pytest.raises(ConfigError):
        calibrate(cal, "coco")
