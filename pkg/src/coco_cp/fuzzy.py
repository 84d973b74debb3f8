"""Inference-time t-norm / t-conorm evaluation of propositional formulas.

A formula is a nested tuple ``("and" | "or" | "not", *args)``; leaves are
variable names looked up in ``truth_values`` or numeric constants.
"""

from __future__ import annotations

from typing import Callable, Mapping, Union

Formula = Union[str, float, int, tuple]


def _godel_neg(a: float) -> float:
    return 1.0 if a == 0 else 0.0


FAMILIES: dict[str, tuple[Callable, Callable, Callable]] = {
    "godel": (min, max, _godel_neg),
    "product": (lambda a, b: a * b, lambda a, b: a + b - a * b, lambda a: 1.0 - a),
    "lukasiewicz": (
        lambda a, b: max(a + b - 1.0, 0.0),
        lambda a, b: min(a + b, 1.0),
        lambda a: 1.0 - a,
    ),
}
_ALIASES = {"gödel": "godel", "goedel": "godel", "łukasiewicz": "lukasiewicz"}


def fuzzy_satisfaction(truth_values: Mapping[str, float], formula: Formula, family: str = "godel") -> float:
    name = family.lower()
    name = _ALIASES.get(name, name)
    if name not in FAMILIES:
        raise ValueError(f"unknown t-norm family {family!r}")
    for v in truth_values.values():
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"truth value {v} outside [0, 1]")
    t, s, neg = FAMILIES[name]

    def ev(f) -> float:
        if isinstance(f, str):
            return float(truth_values[f])
        if isinstance(f, (int, float)):
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"constant {f} outside [0, 1]")
            return float(f)
        op, *args = f
        if op == "not":
            if len(args) != 1:
                raise ValueError("'not' takes one argument")
            return neg(ev(args[0]))
        if op not in ("and", "or") or not args:
            raise ValueError(f"bad connective {op!r}")
        combine = t if op == "and" else s
        acc = ev(args[0])
        for a in args[1:]:
            acc = combine(acc, ev(a))
        return float(acc)

    return ev(formula)
