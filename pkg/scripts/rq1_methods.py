"""Coverage, size and consistency of every method on the synthetic regimes."""

import argparse
import json

import numpy as np

from coco_cp.metrics import summarize
from coco_cp.pipeline import run_methods
from coco_cp.revision import METHODS
from coco_cp.synthio import generate

from _regimes import REGIMES

COLUMNS = [("labels", "consistency"), ("labels", "size"), ("labels", "coverage"),
           ("concepts", "consistency"), ("concepts", "size"), ("concepts", "coverage")]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--regimes", nargs="*", default=list(REGIMES))
    ap.add_argument("--methods", nargs="*", default=list(METHODS))
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n-cal", type=int, default=2000)
    ap.add_argument("--n-test", type=int, default=4000)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--beta", type=float, default=0.1)
    ap.add_argument("--json")
    args = ap.parse_args()

    table = {}
    for name in args.regimes:
        make_kt, spec = REGIMES[name]
        kt = make_kt()
        per_method = {m: [] for m in args.methods}
        for s in range(args.seeds):
            cal, test = generate(kt, spec, args.n_cal, args.n_test, seed=s)
            reps = run_methods(cal, test, kt, args.methods, args.alpha, args.beta, seed=s)
            for m, r in reps.items():
                per_method[m].append([getattr(getattr(r, side), key) for side, key in COLUMNS])
        print(f"\n== {name} ==")
        print(f"{'method':10s}" + "".join(f"{s[0].upper() + ' ' + k[:5]:>14s}" for s, k in COLUMNS))
        table[name] = {}
        for m, rows in per_method.items():
            cells = [summarize(np.asarray(rows)[:, i]) for i in range(len(COLUMNS))]
            table[name][m] = cells
            print(f"{m:10s}" + "".join(f"{mu:8.3f}±{sd:5.3f}" for mu, sd in cells))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=2)


if __name__ == "__main__":
    main()
