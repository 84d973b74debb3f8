"""Split conformal prediction with negative log-probability scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyCalibration
from .records import FactorizedConceptDistribution, RecordBatch
from .sets import ConceptSpace, ProductSet

PROB_CLAMP = 1e-12
# scores this close to the threshold count as ties; marginalised probabilities
# that are equal in exact arithmetic can differ in the last few ulps
TIE_TOL = 1e-12


def score(p):
    """``-log(max(p, 1e-12))``; works elementwise on arrays."""
    out = -np.log(np.maximum(np.asarray(p, dtype=np.float64), PROB_CLAMP))
    # -log(1) is -0.0; keep scores visibly nonnegative
    out = out + 0.0
    return float(out) if np.ndim(out) == 0 else out


def conformal_rank(n: int, level: float) -> int:
    """``ceil((n+1)(1-level))`` guarded against float noise (e.g. 4.5000000001)."""
    return int(math.ceil(round((n + 1) * (1.0 - level), 9)))


def calibrate_quantile(scores, level: float) -> float:
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptyCalibration("no calibration scores")
    if not 0.0 < level < 1.0:
        raise ValueError(f"miscoverage level must lie in (0, 1), got {level}")
    r = conformal_rank(s.size, level)
    if r > s.size:
        return math.inf
    return float(np.partition(s, r - 1)[r - 1])


def within(scores, q: float):
    """``scores <= q`` with float-noise ties included."""
    return np.asarray(scores) <= q + TIE_TOL * max(1.0, abs(q)) if math.isfinite(q) else np.ones(np.shape(scores), bool)


def label_set(label_probs, q: float) -> frozenset[int]:
    """Labels whose score is at most ``q`` (ties included)."""
    return frozenset(np.flatnonzero(within(score(np.atleast_1d(label_probs)), q)).tolist())


def per_concept_set(concept_probs_j, q_j: float) -> frozenset[int]:
    return label_set(concept_probs_j, q_j)


def product_concept_set(space: ConceptSpace, factors: Sequence) -> ProductSet:
    return ProductSet(space, factors)


def bonferroni_levels(beta: float, k: int) -> tuple[float, ...]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return (beta / k,) * k


def set_masks(probs: np.ndarray, q: float) -> np.ndarray:
    """Row-wise membership masks for a batch of probability vectors."""
    return within(score(probs), q)


@dataclass(frozen=True)
class QuantileCalibration:
    n: int
    alpha: float
    betas: tuple[float, ...]
    q_label: float
    q_concepts: tuple[float, ...]
    full_vector_q: Optional[float] = None
    full_vector_beta: Optional[float] = None

    @classmethod
    def fit(cls, cal: RecordBatch, alpha: float, beta: float, bonferroni: bool = True,
            full_vector: bool = False) -> "QuantileCalibration":
        n = len(cal)
        if n == 0:
            raise EmptyCalibration("calibration split is empty")
        rows = np.arange(n)
        q_label = calibrate_quantile(score(cal.label_probs[rows, cal.y_star]), alpha)
        betas = bonferroni_levels(beta, cal.k) if bonferroni else (beta,) * cal.k
        if cal.c_star is None:
            raise EmptyCalibration("concept calibration needs concept annotations")
        q_c = tuple(
            calibrate_quantile(score(p[rows, cal.c_star[:, j]]), b)
            for j, (p, b) in enumerate(zip(cal.concept_probs, betas))
        )
        fq = None
        if full_vector:
            joint = sum(score(p[rows, cal.c_star[:, j]]) for j, p in enumerate(cal.concept_probs))
            fq = calibrate_quantile(joint, beta)
        return cls(n, alpha, betas, q_label, q_c, fq, beta if full_vector else None)

    def label_set(self, label_probs) -> frozenset[int]:
        return label_set(label_probs, self.q_label)

    def concept_set(self, space: ConceptSpace, p: FactorizedConceptDistribution) -> ProductSet:
        if p.domain_sizes != space.domain_sizes:
            raise DimensionMismatch(f"distribution over {p.domain_sizes}, space is {space.domain_sizes}")
        return ProductSet(space, [per_concept_set(pj, qj) for pj, qj in zip(p.per_concept, self.q_concepts)])

    def label_masks(self, batch: RecordBatch) -> np.ndarray:
        return set_masks(batch.label_probs, self.q_label)

    def concept_masks(self, batch: RecordBatch) -> list[np.ndarray]:
        return [set_masks(p, q) for p, q in zip(batch.concept_probs, self.q_concepts)]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "betas": list(self.betas),
            "q_label": _enc(self.q_label),
            "q_concepts": [_enc(q) for q in self.q_concepts],
            "full_vector_q": None if self.full_vector_q is None else _enc(self.full_vector_q),
            "full_vector_beta": self.full_vector_beta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileCalibration":
        return cls(
            n=int(d["n"]),
            alpha=float(d["alpha"]),
            betas=tuple(float(b) for b in d["betas"]),
            q_label=_dec(d["q_label"]),
            q_concepts=tuple(_dec(q) for q in d["q_concepts"]),
            full_vector_q=None if d.get("full_vector_q") is None else _dec(d["full_vector_q"]),
            full_vector_beta=d.get("full_vector_beta"),
        )


def _enc(q: float):
    return "inf" if math.isinf(q) else q


def _dec(q) -> float:
    return math.inf if q == "inf" else float(q)
