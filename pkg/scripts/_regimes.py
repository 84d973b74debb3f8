"""Synthetic regimes shared by the experiment scripts."""

from coco_cp import ActiveCount, DigitSum, PredictorSpec, SumParity, cifar_attribute_rules, compile_program
from coco_cp.synthio import parity_preserving_shift

REGIMES = {
    "sound": (lambda: compile_program(DigitSum(2, 10)), PredictorSpec(tau=1.0, sigma=1.0)),
    "shortcut": (lambda: compile_program(SumParity(2, 10)),
                 PredictorSpec(tau=0.25, sigma=0.0, shortcut=parity_preserving_shift(10))),
    "noisy-shortcut": (lambda: compile_program(SumParity(2, 10)),
                       PredictorSpec(tau=0.25, sigma=0.5, shortcut=parity_preserving_shift(10))),
    "shared-attributes": (lambda: compile_program(cifar_attribute_rules()),
                          PredictorSpec(tau=0.5, sigma=1.0, prior="signatures")),
    "findings": (lambda: compile_program(ActiveCount(4)), PredictorSpec(tau=0.33, sigma=1.0)),
}
