"""Measured COCO coverage against the lower bounds, with and without the knowledge correction."""

import argparse

import numpy as np

from coco_cp.metrics import summarize, theoretical_bounds
from coco_cp.pipeline import run_methods
from coco_cp.synthio import generate

from _regimes import REGIMES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--regime", default="shared-attributes", choices=list(REGIMES))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n-cal", type=int, default=2000)
    ap.add_argument("--n-test", type=int, default=8000)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--beta", type=float, default=0.1)
    args = ap.parse_args()

    make_kt, spec = REGIMES[args.regime]
    kt = make_kt()
    rows = []
    for s in range(args.seeds):
        cal, test = generate(kt, spec, args.n_cal, args.n_test, seed=s)
        r = run_methods(cal, test, kt, ["coco"], args.alpha, args.beta)["coco"]
        rows.append([r.delta_ab, r.delta_de, r.labels.coverage, r.bound_label, r.bound_label_raw,
                     r.concepts.coverage, r.bound_concept, r.bound_concept_raw])
    rows = np.asarray(rows)
    names = ["delta_ab", "delta_de", "label coverage", "label bound", "label bound (raw)",
             "concept coverage", "concept bound", "concept bound (raw)"]
    for i, n in enumerate(names):
        mu, sd = summarize(rows[:, i])
        print(f"{n:22s} {mu:.4f} ± {sd:.4f}")
    d_ab, d_de = rows[:, 0].mean(), round(rows[:, 1].mean(), 2)
    plain = theoretical_bounds(args.alpha, args.beta, d_ab, d_de)
    print(f"{'no correction':22s} label {plain.label:.4f} (delta_de {d_de})  concept {plain.concept:.4f}")


if __name__ == "__main__":
    main()
