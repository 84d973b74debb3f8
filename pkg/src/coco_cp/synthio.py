"""Synthetic concept predictors and the line-delimited record format.

The simulator draws ground-truth concept vectors from a prior, labels them
through the knowledge table, and emits per-concept softmax outputs whose
logits put ``1/τ`` on a target value plus optional Gaussian noise. The
target is the true value, a value drawn from a confusion row, or the
image of the true value under a shortcut permutation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InfeasiblePrior, InvalidProgram, ParseError, SupportViolation
from .knowledge import AttributeRules, KnowledgeTable, marginal_label_distributions
from .records import RecordBatch

BLOCK = 4096
FIELD_ORDER = ("id", "concept_probs", "label_probs", "c_star", "y_star")


@dataclass(frozen=True)
class PredictorSpec:
    """How the simulated concept extractor behaves.

    ``prior`` is ``"uniform"`` (all concept vectors, infeasible ones
    rejected), ``"feasible"`` (uniform over vectors with a nonzero knowledge
    row), ``"signatures"`` (uniform over labels, concepts set to that
    label's signature; attribute-rule knowledge only) or an explicit
    probability vector over flat concept indices.
    """

    tau: float = 1.0
    sigma: float = 0.0
    confusion: Optional[tuple] = None
    shortcut: Optional[tuple[int, ...]] = None
    shortcut_concepts: Optional[tuple[int, ...]] = None
    prior: Union[str, tuple] = "uniform"

    def validate(self, domain_sizes: Sequence[int]) -> None:
        if self.tau < 0 or self.sigma < 0:
            raise InvalidProgram("tau and sigma must be nonnegative")
        if self.confusion is not None:
            if len(self.confusion) != len(domain_sizes):
                raise InvalidProgram("need one confusion matrix per concept")
            for j, (m, v) in enumerate(zip(self.confusion, domain_sizes)):
                m = np.asarray(m, dtype=np.float64)
                if m.shape != (v, v) or np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1) > 1e-9):
                    raise InvalidProgram(f"confusion matrix {j} must be a {v}x{v} row-stochastic matrix")
        if self.shortcut is not None:
            for j in self._shortcut_targets(len(domain_sizes)):
                if sorted(self.shortcut) != list(range(domain_sizes[j])):
                    raise InvalidProgram(f"shortcut {self.shortcut} is not a permutation of concept {j}'s values")

    def _shortcut_targets(self, k: int) -> tuple[int, ...]:
        return tuple(range(k)) if self.shortcut_concepts is None else tuple(self.shortcut_concepts)


def parity_preserving_shift(base: int, step: int = 2) -> tuple[int, ...]:
    """``v -> (v + step) mod base`` restricted to each parity class.

    For even ``base`` this is a bijection that keeps every digit's parity,
    so sums keep their parity while individual digits are wrong.
    """
    if base % 2:
        raise ValueError("parity-preserving shift needs an even base")
    return tuple(((v + step) % base) for v in range(base))


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cum[:, -1]
    return np.argmax(cum > u[:, None], axis=1)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sample_concepts(rng, kt: KnowledgeTable, spec: PredictorSpec, size: int, feasible_rows: np.ndarray):
    space = kt.concept_space
    prior = spec.prior
    if isinstance(prior, str) and prior == "signatures":
        prog = kt.program
        if not isinstance(prog, AttributeRules) or prog.signatures is None:
            raise InvalidProgram("the signatures prior needs attribute-rule knowledge with signatures")
        cls = rng.integers(0, kt.num_labels, size=size)
        return np.asarray(prog.signatures, dtype=np.int64)[cls]
    if isinstance(prior, str) and prior == "uniform":
        idx = rng.integers(0, space.total_size, size=size)
    elif isinstance(prior, str) and prior == "feasible":
        idx = feasible_rows[rng.integers(0, feasible_rows.size, size=size)]
    elif isinstance(prior, str):
        raise InvalidProgram(f"unknown prior {prior!r}")
    else:
        p = np.asarray(prior, dtype=np.float64)
        idx = rng.choice(space.total_size, size=size, p=p / p.sum())
    return space.vectors(idx)


def _check_prior(kt: KnowledgeTable, spec: PredictorSpec) -> np.ndarray:
    w = kt.require_dense("synthetic generation")
    feasible = w.sum(axis=1) > 0
    prior = spec.prior
    if isinstance(prior, str):
        if prior == "uniform" and not feasible.all():
            raise InfeasiblePrior(f"{int((~feasible).sum())} concept vectors have no label; use prior='feasible'")
        if prior == "signatures":
            sig = np.asarray(kt.program.signatures, dtype=np.int64)
            if not feasible[kt.concept_space.indices(sig)].all():
                raise InfeasiblePrior("a signature has an all-zero knowledge row")
    else:
        p = np.asarray(prior, dtype=np.float64)
        if p.shape != (kt.concept_space.total_size,) or np.any(p < 0) or p.sum() <= 0:
            raise InvalidProgram("explicit prior must be a nonnegative vector over all concept vectors")
        if np.any(p[~feasible] > 0):
            raise InfeasiblePrior("prior puts mass on concept vectors with no label")
    return np.flatnonzero(feasible)


def _block(kt: KnowledgeTable, spec: PredictorSpec, seed: int, b: int, size: int, feasible: np.ndarray):
    rng = np.random.default_rng([seed, b])
    space = kt.concept_space
    c_star = _sample_concepts(rng, kt, spec, size, feasible)
    y_star = _categorical(rng, kt.rows(space.indices(c_star)))
    inv_tau = 1.0 / max(spec.tau, 1e-9)
    shortcut_on = set(spec._shortcut_targets(space.k)) if spec.shortcut is not None else set()
    probs = []
    for j, v in enumerate(space.domain_sizes):
        target = c_star[:, j]
        if spec.confusion is not None:
            target = _categorical(rng, np.asarray(spec.confusion[j], dtype=np.float64)[target])
        if j in shortcut_on:
            target = np.asarray(spec.shortcut, dtype=np.int64)[target]
        logits = np.zeros((size, v))
        logits[np.arange(size), target] = inv_tau
        if spec.sigma > 0:
            logits += spec.sigma * rng.standard_normal((size, v))
        probs.append(_softmax(logits))
    return c_star, y_star, probs


def generate(kt: KnowledgeTable, spec: PredictorSpec, n_cal: int, n_test: int, seed: int = 0):
    """Draw ``n_cal + n_test`` i.i.d. records and split them in order.

    Records are produced in fixed blocks of 4096, block ``b`` using the
    stream ``default_rng([seed, b])``, so output depends only on
    ``(spec, seed, n)`` and blocks can be produced independently.
    """
    spec.validate(kt.concept_space.domain_sizes)
    feasible = _check_prior(kt, spec)
    n = n_cal + n_test
    if n_cal < 1 or n_test < 1:
        raise ValueError("need at least one calibration and one test record")
    parts = [_block(kt, spec, seed, b, min(BLOCK, n - s), feasible) for b, s in enumerate(range(0, n, BLOCK))]
    c_star = np.concatenate([p[0] for p in parts])
    y_star = np.concatenate([p[1] for p in parts]).astype(np.int64)
    probs = [np.concatenate([p[2][j] for p in parts]) for j in range(kt.concept_space.k)]
    label_probs = marginal_label_distributions(probs, kt)
    ids = [f"s{seed}-{i}" for i in range(n)]
    batch = RecordBatch(ids, probs, label_probs, y_star, c_star)
    return batch.take(np.arange(n_cal)), batch.take(np.arange(n_cal, n))


def split(batch: RecordBatch, cal_fraction: float = 0.2) -> tuple[RecordBatch, RecordBatch]:
    """Leading ``round(cal_fraction * n)`` records calibrate, the rest evaluate."""
    if not 0.0 < cal_fraction < 1.0:
        raise ValueError("cal_fraction must lie in (0, 1)")
    n_cal = int(round(cal_fraction * len(batch)))
    n_cal = min(max(n_cal, 1), len(batch) - 1)
    return batch.take(np.arange(n_cal)), batch.take(np.arange(n_cal, len(batch)))


# --------------------------------------------------------------------------
# Record files
# --------------------------------------------------------------------------

def write_records(batch: RecordBatch, path, include_label_probs: bool = True) -> None:
    """One JSON object per line with a fixed field order."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, rid in enumerate(batch.ids):
            rec = {
                "id": rid,
                "concept_probs": [[float(x) for x in p[i]] for p in batch.concept_probs],
                "label_probs": [float(x) for x in batch.label_probs[i]] if include_label_probs else None,
                "c_star": None if batch.c_star is None else [int(x) for x in batch.c_star[i]],
                "y_star": int(batch.y_star[i]),
            }
            rec = {k: rec[k] for k in FIELD_ORDER if rec[k] is not None}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def _prob_vector(x, path, lineno, what, tol=1e-6) -> np.ndarray:
    try:
        v = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError(path, lineno, f"{what} is not numeric") from None
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)) or np.any(v < 0) or abs(v.sum() - 1) > tol:
        raise ParseError(path, lineno, f"{what} is not a probability vector")
    return v


def ingest(path, kt: KnowledgeTable, strict: bool = False) -> RecordBatch:
    """Read and validate a record file against the knowledge's spaces.

    Missing ``label_probs`` are filled by marginalising the concept
    distribution through the knowledge. In strict mode every ``(c*, y*)``
    must have positive knowledge weight.
    """
    space = kt.concept_space
    ids, y, c, lp, cp = [], [], [], [], [[] for _ in range(space.k)]
    missing_lp = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise ParseError(path, lineno, "record is not an object")
            for key in ("id", "concept_probs", "y_star"):
                if key not in rec:
                    raise ParseError(path, lineno, f"missing field {key!r}")
            rid = str(rec["id"])
            probs = rec["concept_probs"]
            if not isinstance(probs, list) or len(probs) != space.k:
                raise DimensionMismatch(f"record {rid}: expected {space.k} concept distributions")
            for j, p in enumerate(probs):
                v = _prob_vector(p, path, lineno, f"concept_probs[{j}]")
                if v.size != space.domain_sizes[j]:
                    raise DimensionMismatch(f"record {rid}: concept {j} has {v.size} values, expected {space.domain_sizes[j]}")
                cp[j].append(v)
            try:
                ys = int(rec["y_star"])
            except (TypeError, ValueError):
                raise ParseError(path, lineno, "y_star is not an integer") from None
            if not 0 <= ys < kt.num_labels:
                raise DimensionMismatch(f"record {rid}: y_star={ys} outside 0..{kt.num_labels - 1}")
            if rec.get("label_probs") is not None:
                v = _prob_vector(rec["label_probs"], path, lineno, "label_probs")
                if v.size != kt.num_labels:
                    raise DimensionMismatch(f"record {rid}: {v.size} label probabilities, expected {kt.num_labels}")
                lp.append(v)
            else:
                lp.append(None)
                missing_lp.append(len(ids))
            cs = rec.get("c_star")
            if cs is not None:
                try:
                    cs = space.validate(cs)
                except DimensionMismatch as exc:
                    raise DimensionMismatch(f"record {rid}: {exc}") from None
            c.append(cs)
            ids.append(rid)
            y.append(ys)
    if not ids:
        raise ParseError(path, 0, "no records")
    concept_probs = [np.stack(col) for col in cp]
    label_probs = np.empty((len(ids), kt.num_labels))
    have = [i for i, v in enumerate(lp) if v is not None]
    if have:
        label_probs[have] = np.stack([lp[i] for i in have])
    if missing_lp:
        rows = np.asarray(missing_lp)
        label_probs[rows] = marginal_label_distributions([p[rows] for p in concept_probs], kt)
    has_c = all(v is not None for v in c)
    c_star = np.asarray(c, dtype=np.int64) if has_c else None
    y_star = np.asarray(y, dtype=np.int64)
    if strict:
        if c_star is None:
            raise SupportViolation("strict mode needs c_star on every record")
        w = kt.rows(space.indices(c_star))[np.arange(len(ids)), y_star]
        bad = np.flatnonzero(w <= 0)
        if bad.size:
            i = int(bad[0])
            raise SupportViolation(f"record {ids[i]}: (c*={tuple(c_star[i])}, y*={y_star[i]}) has zero knowledge weight")
    return RecordBatch(ids, concept_probs, label_probs, y_star, c_star)
