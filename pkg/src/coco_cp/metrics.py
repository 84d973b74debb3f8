"""Coverage, size and consistency metrics, joint failures, coverage bounds."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyDataset
from .knowledge import KnowledgeTable, _label_mask, deduce_image
from .revision import PredictionSets
from .sets import as_concept_set


def _nonempty(xs) -> int:
    n = len(xs)
    if n == 0:
        raise EmptyDataset("no records to evaluate")
    return n


def coverage(sets: Sequence, truths: Sequence) -> float:
    """Fraction of records whose set contains the truth (labels or concept tuples)."""
    n = _nonempty(sets)
    if len(truths) != n:
        raise ValueError(f"{n} sets but {len(truths)} ground truths")
    return sum(_contains(s, t) for s, t in zip(sets, truths)) / n


def _contains(s, t) -> bool:
    if isinstance(t, np.ndarray):
        t = tuple(int(x) for x in t) if t.ndim else int(t)
    elif isinstance(t, (np.integer,)):
        t = int(t)
    return t in s


def mean_size(sets: Sequence) -> float:
    n = _nonempty(sets)
    return sum(s.size if hasattr(s, "size") and not isinstance(s, np.ndarray) else len(s) for s in sets) / n


def record_consistency(pred: PredictionSets, kt: KnowledgeTable, side: str = "concepts") -> float:
    """Share of one side's members that have support on the other side.

    Concept side: members ``c`` with ``deduce(c) ∩ Υ ≠ ∅``. Label side:
    members ``y`` with some ``c ∈ Γ`` deducing ``y``. Divides by
    ``max(1, |set|)`` so an empty set scores 0.
    """
    idx = as_concept_set(kt.concept_space, pred.concept_set).indices(kt.cap)
    mask = _label_mask(pred.label_set, kt.num_labels)
    if side == "concepts":
        if idx.size == 0:
            return 0.0
        return float(kt.deduce_rows(idx)[:, mask].any(axis=1).sum()) / max(1, idx.size)
    if side == "labels":
        if not mask.any():
            return 0.0
        image = kt.deduce_rows(idx).any(axis=0) if idx.size else np.zeros(kt.num_labels, dtype=bool)
        return float((mask & image).sum()) / max(1, int(mask.sum()))
    raise ValueError(f"side must be 'concepts' or 'labels', got {side!r}")


def consistency(preds: Sequence[PredictionSets], kt: KnowledgeTable, side: str = "concepts") -> float:
    n = _nonempty(preds)
    return sum(record_consistency(p, kt, side) for p in preds) / n


def joint_failure_label(raw: Sequence[PredictionSets], y_star, kt: KnowledgeTable) -> float:
    """Share of records with ``y*`` outside both ``Υ_α`` and ``deduce_image(Γ_β)``."""
    n = _nonempty(raw)
    miss = 0
    for p, y in zip(raw, y_star):
        y = int(y)
        if y not in p.label_set and y not in deduce_image(p.concept_set, kt):
            miss += 1
    return miss / n


def joint_failure_concept(raw: Sequence[PredictionSets], c_star, kt: KnowledgeTable) -> float:
    """Share of records with ``c*`` outside both ``Γ_β`` and ``abduce(Υ_α)``.

    ``c* ∈ abduce(Υ)`` reduces to ``deduce(c*) ∩ Υ ≠ ∅``, so nothing is enumerated.
    """
    n = _nonempty(raw)
    c_star = np.asarray(c_star, dtype=np.int64)
    ded = kt.deduce_rows(kt.concept_space.indices(c_star))
    miss = 0
    for p, c, row in zip(raw, c_star, ded):
        in_ab = bool(row[_label_mask(p.label_set, kt.num_labels)].any())
        if not in_ab and tuple(int(x) for x in c) not in p.concept_set:
            miss += 1
    return miss / n


def conditional_deltas(raw: Sequence[PredictionSets], y_star, c_star, kt: KnowledgeTable) -> tuple[float, float]:
    """Set-level soundness on a run: ``P(c* ∈ abduce(Υ_α) | y* ∈ Υ_α)`` and
    ``P(y* ∈ deduce_image(Γ_β) | c* ∈ Γ_β)``; NaN when a condition never holds."""
    c_star = np.asarray(c_star, dtype=np.int64)
    ded = kt.deduce_rows(kt.concept_space.indices(c_star))
    ab_hit = ab_n = de_hit = de_n = 0
    for p, y, c, row in zip(raw, y_star, c_star, ded):
        y = int(y)
        if y in p.label_set:
            ab_n += 1
            ab_hit += bool(row[_label_mask(p.label_set, kt.num_labels)].any())
        if tuple(int(x) for x in c) in p.concept_set:
            de_n += 1
            de_hit += y in deduce_image(p.concept_set, kt)
    return (ab_hit / ab_n if ab_n else float("nan")), (de_hit / de_n if de_n else float("nan"))


@dataclass(frozen=True)
class Bounds:
    concept_raw: float
    label_raw: float

    @property
    def concept(self) -> float:
        return float(np.clip(self.concept_raw, 0.0, 1.0))

    @property
    def label(self) -> float:
        return float(np.clip(self.label_raw, 0.0, 1.0))


def theoretical_bounds(alpha: float, beta: float, delta_ab: float, delta_de: float,
                       joint_failure_concept: float = 0.0, joint_failure_label: float = 0.0) -> Bounds:
    """Lower bounds on revised-set coverage, with the joint-failure corrections."""
    for name, v in (("alpha", alpha), ("beta", beta), ("delta_ab", delta_ab), ("delta_de", delta_de),
                    ("joint_failure_concept", joint_failure_concept), ("joint_failure_label", joint_failure_label)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    return Bounds(
        concept_raw=(1.0 - alpha) * delta_ab - beta + joint_failure_concept,
        label_raw=(1.0 - beta) * delta_de - alpha + joint_failure_label,
    )


def abduction_bounds(alpha: float, delta_ab: float) -> tuple[float, float]:
    """``[(1-α)δ_ab, α + δ_ab]`` for the coverage of the abduced concept set."""
    return (1.0 - alpha) * delta_ab, alpha + delta_ab


def deduction_bounds(beta: float, delta_de: float) -> tuple[float, float]:
    """``[(1-β)δ_de, β + δ_de]`` for the coverage of the deduced label set."""
    return (1.0 - beta) * delta_de, beta + delta_de


@dataclass
class SideMetrics:
    coverage: float
    size: float
    consistency: float


@dataclass
class EvaluationReport:
    method: str
    n: int
    labels: SideMetrics
    concepts: SideMetrics
    delta_ab: float = float("nan")
    delta_de: float = float("nan")
    joint_failure_label: float = float("nan")
    joint_failure_concept: float = float("nan")
    bound_label: float = float("nan")
    bound_concept: float = float("nan")
    bound_label_raw: float = float("nan")
    bound_concept_raw: float = float("nan")
    levels: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        d = dict(d)
        d["labels"] = SideMetrics(**d["labels"])
        d["concepts"] = SideMetrics(**d["concepts"])
        return cls(**d)

    def flat(self) -> dict:
        out = {"method": self.method, "n": self.n}
        for side in ("labels", "concepts"):
            for k, v in asdict(getattr(self, side)).items():
                out[f"{side}_{k}"] = v
        for k in ("delta_ab", "delta_de", "joint_failure_label", "joint_failure_concept",
                  "bound_label", "bound_concept", "bound_label_raw", "bound_concept_raw"):
            out[k] = getattr(self, k)
        return out


def evaluate_method(preds: Sequence[PredictionSets], y_star, c_star, kt: KnowledgeTable,
                    method: Optional[str] = None) -> EvaluationReport:
    """Per-side coverage, size and consistency for one method on one run."""
    n = _nonempty(preds)
    labels = SideMetrics(
        coverage=coverage([p.label_set for p in preds], [int(y) for y in y_star]),
        size=mean_size([p.label_set for p in preds]),
        consistency=consistency(preds, kt, "labels"),
    )
    concepts = SideMetrics(
        coverage=float("nan") if c_star is None else coverage([p.concept_set for p in preds], list(np.asarray(c_star))),
        size=mean_size([p.concept_set for p in preds]),
        consistency=consistency(preds, kt, "concepts"),
    )
    return EvaluationReport(method=method or preds[0].method, n=n, labels=labels, concepts=concepts)


def summarize(values: Iterable[float]) -> tuple[float, float]:
    """Mean and population standard deviation across seeds, NaNs ignored."""
    v = np.asarray([x for x in values], dtype=np.float64)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std())
