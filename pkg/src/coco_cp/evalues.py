"""Conformal e-prediction with soft-rank e-values and size-budget selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .conformal import score
from .errors import DimensionMismatch, EmptyCalibration, EmptyDataset
from .records import FactorizedConceptDistribution, RecordBatch
from .sets import DEFAULT_CAP, ConceptSet, ConceptSpace
from .threshold import aggregate_tuple, count_accepted, enumerate_accepted

ALPHA_GRID = (0.10, 0.15, 0.20, 0.25, 0.30)
BETA_GRID = (0.10, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60)
MODES = ("avg", "product")


def soft_rank_evalue(test_score, score_sum, n: int):
    """``(n+1) s / (S + s)``, defined as 0 when ``S + s == 0``. Vectorised."""
    s = np.asarray(test_score, dtype=np.float64)
    denom = np.asarray(score_sum, dtype=np.float64) + s
    e = np.divide((n + 1) * s, denom, out=np.zeros(np.broadcast(s, denom).shape), where=denom > 0)
    return float(e) if e.ndim == 0 else e


def aggregate(e_values: Sequence[float], mode: str = "avg") -> float:
    e = np.asarray(e_values, dtype=np.float64)
    if e.size == 0:
        raise ValueError("nothing to aggregate")
    if mode == "avg":
        return float(e.mean())
    if mode == "product":
        return float(np.prod(e))
    raise ValueError(f"unknown aggregation mode {mode!r}")


def _combine_for(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    return "sum" if mode == "avg" else "prod"


def _accept(mode: str, k: int, level: float):
    t = 1.0 / level
    if mode == "avg":
        return lambda total: total / k < t
    return lambda total: total < t


@dataclass(frozen=True)
class EValueCalibration:
    n: int
    label_score_sum: float
    concept_score_sums: tuple[float, ...]

    @classmethod
    def fit(cls, cal: RecordBatch, rows: Optional[np.ndarray] = None) -> "EValueCalibration":
        """Score sums over ``cal``, or over ``rows`` of it (with repeats) for a bootstrap draw."""
        if len(cal) == 0:
            raise EmptyCalibration("calibration split is empty")
        if cal.c_star is None:
            raise EmptyCalibration("concept calibration needs concept annotations")
        rows = np.arange(len(cal)) if rows is None else np.asarray(rows, dtype=np.int64)
        s_y = score(cal.label_probs[rows, cal.y_star[rows]]).sum()
        s_c = tuple(float(score(p[rows, cal.c_star[rows, j]]).sum()) for j, p in enumerate(cal.concept_probs))
        return cls(len(rows), float(s_y), s_c)

    @property
    def k(self) -> int:
        return len(self.concept_score_sums)

    def label_evalues(self, label_probs) -> np.ndarray:
        return soft_rank_evalue(score(label_probs), self.label_score_sum, self.n)

    def concept_evalues(self, concept_probs: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Per-concept e-value tables, same shapes as the inputs."""
        if len(concept_probs) != self.k:
            raise DimensionMismatch(f"{len(concept_probs)} concepts, calibrated on {self.k}")
        return [soft_rank_evalue(score(p), s, self.n) for p, s in zip(concept_probs, self.concept_score_sums)]

    def to_dict(self) -> dict:
        return {"n": self.n, "label_score_sum": self.label_score_sum,
                "concept_score_sums": list(self.concept_score_sums)}

    @classmethod
    def from_dict(cls, d: dict) -> "EValueCalibration":
        return cls(int(d["n"]), float(d["label_score_sum"]), tuple(float(x) for x in d["concept_score_sums"]))


def evalue_label_set(label_probs, cal: EValueCalibration, level: float) -> frozenset[int]:
    """Labels whose e-value is strictly below ``1 / level``."""
    e = np.atleast_1d(cal.label_evalues(label_probs))
    return frozenset(np.flatnonzero(e < 1.0 / level).tolist())


def evalue_concept_set(p: FactorizedConceptDistribution, cal: EValueCalibration, level: float,
                       mode: str = "avg", space: Optional[ConceptSpace] = None,
                       cap: int = DEFAULT_CAP) -> ConceptSet:
    """Concept vectors whose aggregated e-value is strictly below ``1 / level``."""
    space = space or ConceptSpace(p.domain_sizes)
    if p.domain_sizes != space.domain_sizes:
        raise DimensionMismatch(f"distribution over {p.domain_sizes}, space is {space.domain_sizes}")
    e = cal.concept_evalues(list(p.per_concept))
    idx = enumerate_accepted(e, _accept(mode, cal.k, level), _combine_for(mode), cap, "e-value concept set")
    return ConceptSet(space, idx)


def concept_evalue_of(e_tables: Sequence[np.ndarray], c: np.ndarray, mode: str = "avg") -> np.ndarray:
    """Aggregated e-value of one concept vector per row, e.g. the ground truth.

    ``e_tables[j]`` is ``(N, V_j)`` and ``c`` is ``(N, k)``. Uses the same
    grouping as set enumeration, so ``v < 1/level`` iff the set contains ``c``.
    """
    c = np.asarray(c, dtype=np.int64)
    rows = np.arange(c.shape[0])
    total = aggregate_tuple(e_tables, rows, c, _combine_for(mode))
    return total / len(e_tables) if mode == "avg" else total


def concept_membership(e_tables, c, level: float, mode: str = "avg") -> np.ndarray:
    return concept_evalue_of(e_tables, c, mode) < 1.0 / level


def concept_set_sizes(e_tables: Sequence[np.ndarray], level: float, mode: str = "avg") -> np.ndarray:
    """Cardinality of every record's e-value concept set, without materialising it."""
    return count_accepted(e_tables, _accept(mode, len(e_tables), level), _combine_for(mode))


# --------------------------------------------------------------------------
# Budget selection
# --------------------------------------------------------------------------

@dataclass
class BudgetSelection:
    grid_alpha: tuple[float, ...]
    grid_beta: tuple[float, ...]
    budgets: tuple[float, float]
    iterations: int
    seed: int
    mode: str
    strategy: str
    alpha_t: np.ndarray
    beta_t: np.ndarray
    label_size_t: np.ndarray
    concept_size_t: np.ndarray
    label_infeasible_t: np.ndarray
    concept_infeasible_t: np.ndarray
    full_alpha: float = float("nan")
    full_beta: float = float("nan")
    full_label_infeasible: bool = False
    full_concept_infeasible: bool = False

    @property
    def mean_alpha(self) -> float:
        return float(np.mean(self.alpha_t))

    @property
    def mean_beta(self) -> float:
        return float(np.mean(self.beta_t))

    @property
    def targets(self) -> tuple[float, float]:
        return 1.0 - self.mean_alpha, 1.0 - self.mean_beta

    def to_dict(self) -> dict:
        return {
            "grid_alpha": list(self.grid_alpha),
            "grid_beta": list(self.grid_beta),
            "budgets": list(self.budgets),
            "iterations": self.iterations,
            "seed": self.seed,
            "mode": self.mode,
            "strategy": self.strategy,
            "mean_alpha": self.mean_alpha,
            "mean_beta": self.mean_beta,
            "target_label_coverage": self.targets[0],
            "target_concept_coverage": self.targets[1],
            "full_alpha": self.full_alpha,
            "full_beta": self.full_beta,
            "per_iteration": [
                {
                    "alpha": float(a), "beta": float(b),
                    "label_size": float(ls), "concept_size": float(cs),
                    "label_infeasible": bool(li), "concept_infeasible": bool(ci),
                }
                for a, b, ls, cs, li, ci in zip(
                    self.alpha_t, self.beta_t, self.label_size_t, self.concept_size_t,
                    self.label_infeasible_t, self.concept_infeasible_t,
                )
            ],
        }


def grid_sizes(cal: EValueCalibration, test: RecordBatch, grid_alpha, grid_beta, mode: str = "avg"):
    """Mean raw label and concept set sizes on ``test`` for every grid level."""
    e_y = cal.label_evalues(test.label_probs)
    label = np.array([(e_y < 1.0 / a).sum(axis=1).mean() for a in grid_alpha])
    e_c = cal.concept_evalues(test.concept_probs)
    concept = np.array([concept_set_sizes(e_c, b, mode).mean() for b in grid_beta])
    return label, concept


def _pick(levels: np.ndarray, sizes: np.ndarray, budget: float) -> tuple[int, bool]:
    ok = np.flatnonzero(sizes <= budget)
    if ok.size == 0:
        return int(np.argmax(levels)), True
    return int(ok[np.argmin(levels[ok])]), False


def select_levels(label_sizes, concept_sizes, grid_alpha, grid_beta, budgets, strategy: str = "per-side"):
    """Smallest level per side whose mean set size is within budget.

    Returns ``(i_alpha, i_beta, label_infeasible, concept_infeasible)``.
    ``"lexicographic"`` scans the joint grid ordered by alpha then beta and
    takes the first pair meeting both budgets; since the two sides' raw sizes
    do not interact it coincides with ``"per-side"`` whenever both are
    feasible, and otherwise falls back to per-side choices.
    """
    ga, gb = np.asarray(grid_alpha), np.asarray(grid_beta)
    ia, inf_a = _pick(ga, np.asarray(label_sizes), budgets[0])
    ib, inf_b = _pick(gb, np.asarray(concept_sizes), budgets[1])
    if strategy == "lexicographic":
        for i in np.argsort(ga, kind="stable"):
            for j in np.argsort(gb, kind="stable"):
                if label_sizes[i] <= budgets[0] and concept_sizes[j] <= budgets[1]:
                    return int(i), int(j), False, False
    elif strategy != "per-side":
        raise ValueError(f"unknown selection strategy {strategy!r}")
    return ia, ib, inf_a, inf_b


def budget_select(cal: RecordBatch, test: RecordBatch, budgets: tuple[float, float],
                  grid_alpha=ALPHA_GRID, grid_beta=BETA_GRID, iterations: int = 100, seed: int = 0,
                  mode: str = "avg", strategy: str = "per-side") -> BudgetSelection:
    """Bootstrap the calibration split and select budget-meeting levels per draw.

    Draw ``t`` resamples ``len(cal)`` rows with replacement using the stream
    ``default_rng([seed, t])``, so any subset of iterations can be recomputed
    independently.
    """
    if len(test) == 0:
        raise EmptyDataset("budget selection needs test records")
    if iterations < 1:
        raise ValueError("need at least one bootstrap iteration")
    if not grid_alpha or not grid_beta:
        raise ValueError("empty grid")
    ga, gb = tuple(float(a) for a in grid_alpha), tuple(float(b) for b in grid_beta)
    for v in ga + gb:
        if not 0.0 < v < 1.0:
            raise ValueError(f"grid level {v} outside (0, 1)")
    n = len(cal)
    out = {k: np.empty(iterations) for k in ("a", "b", "ls", "cs")}
    inf_a = np.zeros(iterations, dtype=bool)
    inf_b = np.zeros(iterations, dtype=bool)
    for t in range(iterations):
        rng = np.random.default_rng([seed, t])
        ec = EValueCalibration.fit(cal, rng.integers(0, n, size=n))
        ls, cs = grid_sizes(ec, test, ga, gb, mode)
        ia, ib, fa, fb = select_levels(ls, cs, ga, gb, budgets, strategy)
        out["a"][t], out["b"][t] = ga[ia], gb[ib]
        out["ls"][t], out["cs"][t] = ls[ia], cs[ib]
        inf_a[t], inf_b[t] = fa, fb
    ls, cs = grid_sizes(EValueCalibration.fit(cal), test, ga, gb, mode)
    ia, ib, fa, fb = select_levels(ls, cs, ga, gb, budgets, strategy)
    return BudgetSelection(
        grid_alpha=ga, grid_beta=gb, budgets=(float(budgets[0]), float(budgets[1])),
        iterations=iterations, seed=seed, mode=mode, strategy=strategy,
        alpha_t=out["a"], beta_t=out["b"], label_size_t=out["ls"], concept_size_t=out["cs"],
        label_infeasible_t=inf_a, concept_infeasible_t=inf_b,
        full_alpha=ga[ia], full_beta=gb[ib], full_label_infeasible=fa, full_concept_infeasible=fb,
    )
