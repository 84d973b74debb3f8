"""End-to-end acceptance checks, one test per criterion.

Each test prints ``PASS``/``FAIL`` with the measured values and the
tolerance; the lines are repeated in the terminal summary.
"""

import shutil
import time

import numpy as np
import pytest

from coco_cp import cli
from coco_cp.conformal import QuantileCalibration
from coco_cp.evalues import EValueCalibration, concept_evalue_of, concept_membership, concept_set_sizes
from coco_cp.knowledge import ActiveCount, DigitSum, SumParity, cifar_attribute_rules, compile_program
from coco_cp.metrics import record_consistency, theoretical_bounds
from coco_cp.pipeline import calibrate, evaluate, predict
from coco_cp.synthio import PredictorSpec, generate, parity_preserving_shift
from coco_cp.verify import (
    _run,
    check_fixed_point,
    check_abduce_meet,
    check_preimage_roundtrip,
    check_optimality,
    meet_converse_fails,
)

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance
SEEDS = range(10)
RS_SPEC = PredictorSpec(tau=0.25, sigma=0.0, shortcut=parity_preserving_shift(10))


def report(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {name} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _suite(fn, n, max_total):
    # ten seeds of n/10 instances, as in the verify command
    fails = sum(_run(fn.__name__, n // 10, s, fn, max_total).failures for s in range(1, 11))
    return n, fails


def test_1_quantile_coverage():
    t0 = time.perf_counter()
    kt = compile_program(DigitSum(2, 10))
    lab, con = [], []
    for s in SEEDS:
        cal, test = generate(kt, PredictorSpec(tau=1.0, sigma=1.0), 2000, 10000, seed=s)
        qc = QuantileCalibration.fit(cal, 0.1, 0.1)
        rows = np.arange(len(test))
        lab.append(qc.label_masks(test)[rows, test.y_star].mean())
        masks = qc.concept_masks(test)
        con.append(np.logical_and.reduce([m[rows, test.c_star[:, j]] for j, m in enumerate(masks)]).mean())
    dt = time.perf_counter() - t0
    ok = 0.885 <= np.mean(lab) <= 0.915 and np.mean(con) >= 0.885 and dt < 30
    report(1, "quantile coverage", ok,
           f"label mean {np.mean(lab):.4f} in [0.885, 0.915]; Bonferroni concept mean {np.mean(con):.4f} "
           f"(min {np.min(con):.4f}) >= 0.885; {dt:.1f}s < 30s")


def test_2_fixed_point():
    n, fails = _suite(check_fixed_point, 1000, 64)
    report(2, "revise is idempotent", fails == 0, f"{fails}/{n} failures")


def test_3_optimality():
    n, fails = _suite(check_optimality, 1000, 1024)
    report(3, "revise equals greatest consistent pair", fails == 0, f"{fails}/{n} failures, total_size <= 1024")


def test_4_abduction_laws():
    n1, f1 = _suite(check_abduce_meet, 1000, 64)
    n2, f2 = _suite(check_preimage_roundtrip, 1000, 64)
    conv = meet_converse_fails()
    report(4, "abduction laws", f1 == 0 and f2 == 0 and conv,
           f"inclusion {f1}/{n1} failures; round trip {f2}/{n2} failures; converse counterexample holds: {conv}")


def _coco_runs():
    """(name, kt, test, preds, raws) for COCO on every regime used here."""
    regimes = [
        ("sound", compile_program(DigitSum(2, 10)), PredictorSpec(tau=1.0, sigma=1.0)),
        ("shortcut", compile_program(SumParity(2, 10)), RS_SPEC),
        ("noisy-shortcut", compile_program(SumParity(2, 10)),
         PredictorSpec(tau=0.25, sigma=0.5, shortcut=parity_preserving_shift(10))),
        ("shared-attributes", compile_program(cifar_attribute_rules()),
         PredictorSpec(tau=0.5, sigma=1.0, prior="signatures")),
        ("findings", compile_program(ActiveCount(4)), PredictorSpec(tau=0.33, sigma=1.0)),
    ]
    for name, kt, spec in regimes:
        for s in range(3):
            cal, test = generate(kt, spec, 1000, 2000, seed=s)
            for method in ("coco", "coco-star"):
                st = calibrate(cal, method, 0.1, 0.1)
                preds, raws = predict(st, test, kt, method)
                yield f"{name}/{method}/seed{s}", kt, test, preds, raws


def test_5_coco_consistency():
    bad, checked, empty = [], 0, 0
    for name, kt, _, preds, _ in _coco_runs():
        for p in preds:
            if p.label_size == 0 or p.concept_size == 0:
                empty += 1
                continue
            checked += 1
            if record_consistency(p, kt, "concepts") != 1.0 or record_consistency(p, kt, "labels") != 1.0:
                bad.append(name)
    kt = compile_program(SumParity(2, 10))
    cal, test = generate(kt, RS_SPEC, 2000, 8000, seed=0)
    st = calibrate(cal, "rpb", 0.1, 0.1)
    rpb = evaluate(*predict(st, test, kt, "rpb"), test, kt, st, "rpb")
    coco = evaluate(*predict(st, test, kt, "coco"), test, kt, st, "coco")
    ok = not bad and coco.concepts.consistency == 1.0 and coco.labels.consistency == 1.0 \
        and rpb.concepts.consistency < 1.0
    report(5, "COCO consistency", ok,
           f"{len(bad)} inconsistent of {checked} nonempty COCO records ({empty} empty, scored 0 by convention); "
           f"shortcut regime: COCO {coco.concepts.consistency:.2f}/{coco.labels.consistency:.2f}, "
           f"RPB concept consistency {rpb.concepts.consistency:.2f} < 1")


def test_6_rpb_coco_relation():
    kt = compile_program(SumParity(2, 10))
    same = subset = True
    shrunk, rpb_size, coco_size = 0, [], []
    for s in range(3):
        cal, test = generate(kt, RS_SPEC, 2000, 8000, seed=s)
        st = calibrate(cal, "coco", 0.1, 0.1)
        rpb, raws = predict(st, test, kt, "rpb")
        coco, _ = predict(st, test, kt, "coco")
        for r, c, raw in zip(rpb, coco, raws):
            same &= r.label_set == c.label_set
            g_raw = set(raw.concept_set.indices())
            subset &= set(c.concept_set.indices()) <= g_raw
            shrunk += c.concept_size < len(g_raw)
            rpb_size.append(r.concept_size)
            coco_size.append(c.concept_size)
    ok = same and subset and shrunk >= 1
    report(6, "RPB/COCO relation", ok,
           f"label sets identical: {same}; COCO concepts within raw: {subset}; strictly shrunk on {shrunk} records; "
           f"concept size RPB {np.mean(rpb_size):.2f} -> COCO {np.mean(coco_size):.2f}")


def test_7_bound():
    kt = compile_program(cifar_attribute_rules())
    spec = PredictorSpec(tau=0.5, sigma=1.0, prior="signatures")
    d_ab, d_de, covered = [], [], []
    for s in SEEDS:
        cal, test = generate(kt, spec, 2000, 8000, seed=s)
        st = calibrate(cal, "coco", 0.1, 0.1)
        rep = evaluate(*predict(st, test, kt, "coco"), test, kt, st, "coco")
        d_ab.append(rep.delta_ab)
        d_de.append(rep.delta_de)
        covered.append((rep.labels.coverage, rep.bound_label))
    plain = theoretical_bounds(0.1, 0.1, 1.0, 0.8).label_raw
    cov_ok = all(c >= b for c, b in covered)
    ok = abs(np.mean(d_de) - 0.8) <= 0.01 and np.mean(d_ab) == 1.0 and cov_ok and abs(plain - 0.62) < 1e-12
    worst = min(c - b for c, b in covered)
    report(7, "knowledge-corrected bound", ok,
           f"delta_de {np.mean(d_de):.4f} (0.80 +- 0.01); delta_ab {np.mean(d_ab):.4f}; label coverage >= bound on "
           f"all seeds: {cov_ok} (mean {np.mean([c for c, _ in covered]):.3f} vs {np.mean([b for _, b in covered]):.3f}, "
           f"smallest margin {worst:.3f}); no-correction bound {plain:.12f}")


def test_8_evalues():
    lines, ok = [], True
    for k, n_test in ((2, 10000), (4, 10000), (8, 10000)):
        kt = compile_program(DigitSum(k, 4))
        cov, lab_e, con_e, size = [], [], [], []
        for s in SEEDS:
            cal, test = generate(kt, PredictorSpec(tau=0.3, sigma=1.0), 1000, n_test, seed=s)
            ev = EValueCalibration.fit(cal)
            e = ev.concept_evalues(test.concept_probs)
            cov.append(concept_membership(e, test.c_star, 0.1, "avg").mean())
            size.append(concept_set_sizes(e, 0.1, "avg").mean())
            con_e.append(concept_evalue_of(e, test.c_star, "avg").mean())
            lab_e.append(ev.label_evalues(test.label_probs)[np.arange(len(test)), test.y_star].mean())
        se = lambda v: np.std(v, ddof=1) / np.sqrt(len(v))  # noqa: E731
        valid = np.mean(lab_e) <= 1 + 3 * se(lab_e) and np.mean(con_e) <= 1 + 3 * se(con_e)
        ok &= bool(valid and np.mean(cov) >= 1 - 0.1 - 0.015)
        lines.append(f"k={k}: avg-mode coverage {np.mean(cov):.4f} >= 0.885 (mean size {np.mean(size):.1f} of "
                     f"{4 ** k}), mean e label {np.mean(lab_e):.3f} "
                     f"concept {np.mean(con_e):.3f} <= 1 + 3 SE")
    report(8, "e-value validity and single-threshold coverage", ok, "; ".join(lines))


def test_9_budget():
    t0 = time.perf_counter()
    kt = compile_program(ActiveCount(4))
    ok, over, flagged, rows = True, 0, 0, []
    for s in SEEDS:
        cal, test = generate(kt, PredictorSpec(tau=0.33, sigma=1.0), 2000, 8000, seed=s)
        st = calibrate(cal, "coco-star", budgets=(2, 5), test=test, iterations=100, seed=s)
        sel = st.selection
        flagged += int(sel.label_infeasible_t.sum() + sel.concept_infeasible_t.sum())
        over += int(((sel.label_size_t > 2) & ~sel.label_infeasible_t).sum())
        over += int(((sel.concept_size_t > 5) & ~sel.concept_infeasible_t).sum())
        rep = evaluate(*predict(st, test, kt, "coco-star"), test, kt, st, "coco-star")
        ta, tb = sel.targets
        ok &= rep.labels.coverage >= ta and rep.concepts.coverage >= tb
        rows.append((rep.labels.coverage, ta, rep.concepts.coverage, tb, rep.labels.size, rep.concepts.size))
    dt = time.perf_counter() - t0
    m = np.mean(rows, axis=0)
    ok = bool(ok and over == 0 and dt < 300)
    report(9, "budget selection", ok,
           f"{over} over-budget unflagged iterations ({flagged} flagged) of 2x1000; coverage labels {m[0]:.3f} >= "
           f"{m[1]:.3f}, concepts {m[2]:.3f} >= {m[3]:.3f} on every seed; sizes {m[4]:.2f}/{m[5]:.2f}; {dt:.0f}s < 300s")


def test_10_determinism(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("knowledge: {type: sum_parity, k: 2, base: 10}\n"
                   "predictor: {tau: 0.25, sigma: 0.5, shortcut: parity_shift, base: 10}\n"
                   "method: coco\nseeds: [0, 1, 2]\nn_cal: 1000\nn_test: 3000\n")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out, workers in ((a, "1"), (b, "1"), (c, "4")):
        assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--workers", workers]) == 0
    same_report = (a / "reports.json").read_bytes() == (b / "reports.json").read_bytes()
    files = sorted(p.relative_to(a) for p in a.rglob("*.jsonl"))
    same_preds = all((a / f).read_bytes() == (c / f).read_bytes() for f in files)
    for d in (a, b, c):
        shutil.rmtree(d)
    report(10, "determinism", same_report and same_preds and bool(files),
           f"reports byte-identical across two runs: {same_report}; {len(files)} record/prediction files "
           f"identical with 1 vs 4 workers: {same_preds}")
