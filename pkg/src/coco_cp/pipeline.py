"""Calibrate, predict and evaluate on record batches."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .conformal import QuantileCalibration
from .errors import ConfigError
from .evalues import ALPHA_GRID, BETA_GRID, BudgetSelection, EValueCalibration, budget_select, evalue_concept_set
from .knowledge import KnowledgeTable, estimate_deltas
from .metrics import EvaluationReport, evaluate_method, joint_failure_concept, joint_failure_label, theoretical_bounds
from .records import RecordBatch
from .revision import PredictionSets, apply_method, argmax_concepts, argmax_labels
from .sets import ConceptSet, ProductSet


@dataclass
class CalibrationState:
    """Frozen calibration for one run: quantile thresholds or e-value sums plus levels."""

    kind: str
    alpha: float
    beta: float
    quantile: Optional[QuantileCalibration] = None
    evalue: Optional[EValueCalibration] = None
    mode: str = "avg"
    selection: Optional[BudgetSelection] = None

    @property
    def bound_levels(self) -> tuple[float, float]:
        """Levels entering the coverage bounds: expected selected levels under a budget."""
        if self.selection is not None:
            return self.selection.mean_alpha, self.selection.mean_beta
        return self.alpha, self.beta

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "mode": self.mode,
            "quantile": None if self.quantile is None else self.quantile.to_dict(),
            "evalue": None if self.evalue is None else self.evalue.to_dict(),
            "selection": None if self.selection is None else self.selection.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationState":
        return cls(
            kind=d["kind"], alpha=float(d["alpha"]), beta=float(d["beta"]), mode=d.get("mode", "avg"),
            quantile=None if d.get("quantile") is None else QuantileCalibration.from_dict(d["quantile"]),
            evalue=None if d.get("evalue") is None else EValueCalibration.from_dict(d["evalue"]),
        )


def calibrate(cal: RecordBatch, method: str, alpha: Optional[float] = None, beta: Optional[float] = None,
              budgets: Optional[tuple[float, float]] = None, test: Optional[RecordBatch] = None,
              mode: str = "avg", grid_alpha=ALPHA_GRID, grid_beta=BETA_GRID, iterations: int = 100,
              seed: int = 0, strategy: str = "per-side", bonferroni: bool = True) -> CalibrationState:
    """Quantile calibration for every method but ``coco-star``, which uses e-values.

    With ``budgets`` the e-value levels are chosen on ``test`` by bootstrap;
    the emitted sets use the levels selected on the full calibration split.
    """
    if method == "coco-star":
        ev = EValueCalibration.fit(cal)
        if budgets is not None:
            if test is None:
                raise ConfigError("budget selection needs the evaluation split")
            sel = budget_select(cal, test, budgets, grid_alpha, grid_beta, iterations, seed, mode, strategy)
            return CalibrationState("evalue", sel.full_alpha, sel.full_beta, evalue=ev, mode=mode, selection=sel)
        if alpha is None or beta is None:
            raise ConfigError("coco-star needs either levels or budgets")
        return CalibrationState("evalue", alpha, beta, evalue=ev, mode=mode)
    if alpha is None or beta is None:
        raise ConfigError(f"method {method!r} needs alpha and beta")
    q = QuantileCalibration.fit(cal, alpha, beta, bonferroni=bonferroni)
    return CalibrationState("quantile", alpha, beta, quantile=q)


def raw_sets(state: CalibrationState, batch: RecordBatch, kt: KnowledgeTable, rows=None):
    """Per-record raw conformal sets ``(Υ, Γ)`` for the given rows."""
    rows = np.arange(len(batch)) if rows is None else np.asarray(rows)
    space = kt.concept_space
    out = []
    if state.kind == "quantile":
        q = state.quantile
        sub = batch.take(rows)
        lm = q.label_masks(sub)
        cms = q.concept_masks(sub)
        for r in range(len(rows)):
            out.append((frozenset(np.flatnonzero(lm[r]).tolist()),
                        ProductSet(space, [np.flatnonzero(m[r]) for m in cms])))
        return out
    ev = state.evalue
    e_y = ev.label_evalues(batch.label_probs[rows])
    t = 1.0 / state.alpha
    for r, i in enumerate(rows):
        ups = frozenset(np.flatnonzero(e_y[r] < t).tolist())
        gam = evalue_concept_set(batch.concept_distribution(int(i)), ev, state.beta, state.mode, space, kt.cap)
        out.append((ups, gam))
    return out


def _predict_rows(state, batch, kt, method, rows):
    preds, raws = [], []
    space = kt.concept_space
    for (ups, gam), i in zip(raw_sets(state, batch, kt, rows), rows):
        i = int(i)
        point_label = argmax_labels(batch.label_probs[i]) if method == "co" else None
        point_concepts = argmax_concepts(space, batch.concept_distribution(i)) if method == "to" else None
        preds.append(apply_method(method, ups, gam, kt, point_label, point_concepts,
                                  provenance={"alpha": state.alpha, "beta": state.beta, "kind": state.kind}))
        raws.append(PredictionSets(ups, gam, "raw"))
    return preds, raws


def predict(state: CalibrationState, batch: RecordBatch, kt: KnowledgeTable, method: str,
            workers: int = 1, chunk: int = 2048) -> tuple[list[PredictionSets], list[PredictionSets]]:
    """Method outputs and raw sets for every record, in record order.

    ``workers > 1`` spreads fixed chunks over threads; chunks are
    reassembled in order so the output does not depend on scheduling.
    """
    if (method == "coco-star") != (state.kind == "evalue"):
        raise ConfigError(f"method {method!r} does not match a {state.kind} calibration")
    chunks = [np.arange(s, min(s + chunk, len(batch))) for s in range(0, len(batch), chunk)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda r: _predict_rows(state, batch, kt, method, r), chunks))
    else:
        parts = [_predict_rows(state, batch, kt, method, r) for r in chunks]
    preds = [p for part in parts for p in part[0]]
    raws = [p for part in parts for p in part[1]]
    return preds, raws


def evaluate(preds: Sequence[PredictionSets], raws: Sequence[PredictionSets], batch: RecordBatch,
             kt: KnowledgeTable, state: CalibrationState, method: Optional[str] = None) -> EvaluationReport:
    """Metrics for one method plus soundness gaps, joint failures and bounds."""
    rep = evaluate_method(preds, batch.y_star, batch.c_star, kt, method)
    a, b = state.bound_levels
    rep.levels = {"alpha": state.alpha, "beta": state.beta, "bound_alpha": a, "bound_beta": b}
    if batch.c_star is None:
        return rep
    rep.delta_ab, rep.delta_de = estimate_deltas(batch, kt)
    rep.joint_failure_label = joint_failure_label(raws, batch.y_star, kt)
    rep.joint_failure_concept = joint_failure_concept(raws, batch.c_star, kt)
    bounds = theoretical_bounds(a, b, rep.delta_ab, rep.delta_de, rep.joint_failure_concept, rep.joint_failure_label)
    rep.bound_label, rep.bound_concept = bounds.label, bounds.concept
    rep.bound_label_raw, rep.bound_concept_raw = bounds.label_raw, bounds.concept_raw
    return rep


def run_methods(cal: RecordBatch, test: RecordBatch, kt: KnowledgeTable, methods: Sequence[str],
                alpha: float, beta: float, **kw) -> dict[str, EvaluationReport]:
    """Evaluate several methods on one calibration/evaluation split."""
    out = {}
    qstate = None
    for m in methods:
        if m == "coco-star":
            state = calibrate(cal, m, alpha, beta, test=test, **kw)
        else:
            qstate = qstate or calibrate(cal, m, alpha, beta)
            state = qstate
        preds, raws = predict(state, test, kt, m)
        out[m] = evaluate(preds, raws, test, kt, state, m)
    return out


def prediction_record(rid: str, p: PredictionSets) -> dict:
    """Serializable form of one record's sets: product factors when lazy, flat indices otherwise."""
    g = p.concept_set
    if isinstance(g, ProductSet):
        concepts = {"factors": [list(f) for f in g.factors]}
    else:
        concepts = {"indices": [int(i) for i in g.indices()]}
    return {"id": rid, "method": p.method, "labels": sorted(p.label_set), "concepts": concepts}


def prediction_from_record(d: dict, kt: KnowledgeTable) -> PredictionSets:
    c = d["concepts"]
    if "factors" in c:
        gam = ProductSet(kt.concept_space, c["factors"])
    else:
        gam = ConceptSet(kt.concept_space, np.asarray(c["indices"], dtype=np.int64))
    return PredictionSets(frozenset(int(y) for y in d["labels"]), gam, d.get("method", "raw"))
