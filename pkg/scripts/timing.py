"""Wall-clock cost of calibration, prediction and evaluation per method and regime."""

import argparse
import time

from coco_cp.pipeline import calibrate, evaluate, predict
from coco_cp.revision import METHODS
from coco_cp.synthio import generate

from _regimes import REGIMES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--regimes", nargs="*", default=list(REGIMES))
    ap.add_argument("--n-cal", type=int, default=2000)
    ap.add_argument("--n-test", type=int, default=8000)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(f"{'regime':18s} {'method':10s} {'calibrate':>10s} {'predict':>10s} {'evaluate':>10s}")
    for name in args.regimes:
        make_kt, spec = REGIMES[name]
        kt = make_kt()
        cal, test = generate(kt, spec, args.n_cal, args.n_test, seed=0)
        for m in METHODS:
            t0 = time.perf_counter()
            st = calibrate(cal, m, 0.1, 0.1)
            t1 = time.perf_counter()
            preds, raws = predict(st, test, kt, m, workers=args.workers)
            t2 = time.perf_counter()
            evaluate(preds, raws, test, kt, st, m)
            t3 = time.perf_counter()
            print(f"{name:18s} {m:10s} {t1 - t0:10.3f} {t2 - t1:10.3f} {t3 - t2:10.3f}")


if __name__ == "__main__":
    main()
