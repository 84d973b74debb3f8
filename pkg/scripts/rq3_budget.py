"""Budgeted level selection: chosen levels, realized sizes and coverage against the targets."""

import argparse

import numpy as np

from coco_cp.metrics import summarize
from coco_cp.pipeline import calibrate, evaluate, predict
from coco_cp.synthio import generate

from _regimes import REGIMES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--regime", default="findings", choices=list(REGIMES))
    ap.add_argument("--budgets", type=float, nargs=2, default=(2.0, 5.0), metavar=("LABELS", "CONCEPTS"))
    ap.add_argument("--iterations", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n-cal", type=int, default=2000)
    ap.add_argument("--n-test", type=int, default=8000)
    ap.add_argument("--mode", default="avg", choices=("avg", "product"))
    args = ap.parse_args()

    make_kt, spec = REGIMES[args.regime]
    kt = make_kt()
    rows = []
    for s in range(args.seeds):
        cal, test = generate(kt, spec, args.n_cal, args.n_test, seed=s)
        st = calibrate(cal, "coco-star", budgets=tuple(args.budgets), test=test,
                       iterations=args.iterations, seed=s, mode=args.mode)
        sel = st.selection
        preds, raws = predict(st, test, kt, "coco-star")
        r = evaluate(preds, raws, test, kt, st, "coco-star")
        t_lab, t_con = sel.targets
        rows.append([sel.mean_alpha, sel.mean_beta, r.labels.size, r.concepts.size,
                     r.labels.coverage, t_lab, r.concepts.coverage, t_con])
        print(f"seed {s}: levels ({st.alpha}, {st.beta}), flagged "
              f"({int(sel.label_infeasible_t.sum())}, {int(sel.concept_infeasible_t.sum())}) of {args.iterations}")
    rows = np.asarray(rows)
    for i, n in enumerate(["mean alpha~", "mean beta~", "label size", "concept size",
                           "label coverage", "label target", "concept coverage", "concept target"]):
        mu, sd = summarize(rows[:, i])
        print(f"{n:18s} {mu:.4f} ± {sd:.4f}")


if __name__ == "__main__":
    main()
