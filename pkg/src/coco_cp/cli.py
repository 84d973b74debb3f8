"""Command-line entry point.

Every phase reads and writes files in an output directory and records the
SHA-256 of what it wrote, plus wall-clock time, in ``manifest.json``.
Payload files never contain timings, so identical inputs give identical
bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional


from . import __version__
from .evalues import budget_select
from .config import BudgetConfig, RunConfig, load_config, override
from .errors import CocoError, ConfigError, MissingInput
from .knowledge import KnowledgeTable
from .metrics import EvaluationReport, summarize
from .pipeline import (
    CalibrationState,
    calibrate,
    evaluate,
    predict,
    prediction_from_record,
    prediction_record,
)
from .records import RecordBatch
from .revision import METHODS, PredictionSets
from .synthio import generate, ingest, split, write_records
from .verify import require_all, run_all

log = logging.getLogger("coco_cp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _record_phase(out: Path, phase: str, files: list[Path], seconds: float, cfg: Optional[RunConfig] = None,
                  extra: Optional[dict] = None) -> None:
    mpath = out / "manifest.json"
    m = json.loads(mpath.read_text()) if mpath.exists() else {}
    m["tool_version"] = __version__
    if cfg is not None:
        m["config"] = cfg.to_dict()
    m.setdefault("phases", {})[phase] = {
        "outputs": {f.name: _sha256(f) for f in files},
        "seconds": round(seconds, 6),
    }
    if extra:
        m.update(extra)
    mpath.write_text(_dump(m))


def _load_cfg(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise ConfigError("--config: required for this command")
    cfg = load_config(args.config)
    budgets = cfg.budgets
    if args.budget_labels is not None or args.budget_concepts is not None:
        if args.budget_labels is None or args.budget_concepts is None:
            raise ConfigError("--budget-labels and --budget-concepts must be given together")
        base = budgets or BudgetConfig(args.budget_labels, args.budget_concepts)
        budgets = BudgetConfig(args.budget_labels, args.budget_concepts, base.grid_alpha, base.grid_beta,
                               base.iterations, base.strategy)
    cfg = override(cfg, method=args.method, alpha=args.alpha, beta=args.beta, mode=args.mode,
                   strict=True if args.strict else None, out=args.out, budgets=budgets)
    if args.seed is not None:
        cfg = override(cfg, seeds=(args.seed,))
    if cfg.method != "coco-star" and (cfg.alpha is None or cfg.beta is None):
        raise ConfigError(f"alpha/beta: required for method {cfg.method}")
    return cfg


def _kt(cfg: RunConfig, args) -> KnowledgeTable:
    base = Path(args.config).resolve().parent if getattr(args, "config", None) else None
    return cfg.knowledge_table(base)


def _read_split(data: Path, kt: KnowledgeTable, strict: bool) -> tuple[RecordBatch, RecordBatch]:
    cal, test = data / "cal.jsonl", data / "test.jsonl"
    for p in (cal, test):
        if not p.exists():
            raise MissingInput(f"{p} not found; run gen first or pass --records")
    return ingest(cal, kt, strict), ingest(test, kt, strict)


def _calibrate(cfg: RunConfig, cal: RecordBatch, test: RecordBatch, seed: int) -> CalibrationState:
    b = cfg.budgets
    if cfg.method == "coco-star" and b is not None:
        return calibrate(cal, "coco-star", budgets=(b.labels, b.concepts), test=test, mode=cfg.mode,
                         grid_alpha=b.grid_alpha, grid_beta=b.grid_beta, iterations=b.iterations,
                         seed=seed, strategy=b.strategy)
    return calibrate(cal, cfg.method, cfg.alpha, cfg.beta, mode=cfg.mode)


def _write_predictions(path: Path, ids, preds: list[PredictionSets]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, p in zip(ids, preds):
            fh.write(json.dumps(prediction_record(rid, p), separators=(",", ":")) + "\n")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = _load_cfg(args)
    kt = _kt(cfg, args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.records or args.records:
        batch = ingest(args.records or cfg.records, kt, cfg.strict)
        cal, test = split(batch, cfg.cal_fraction)
    else:
        cal, test = generate(kt, cfg.predictor_spec(), cfg.n_cal, cfg.n_test, seed=cfg.seeds[0])
    write_records(cal, out / "cal.jsonl")
    write_records(test, out / "test.jsonl")
    _record_phase(out, "gen", [out / "cal.jsonl", out / "test.jsonl"], time.perf_counter() - t0, cfg)
    print(f"wrote {len(cal)} calibration and {len(test)} evaluation records to {out}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_cfg(args)
    kt = _kt(cfg, args)
    data = Path(args.data or cfg.out)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cal, test = _read_split(data, kt, cfg.strict)
    state = _calibrate(cfg, cal, test, cfg.seeds[0])
    path = out / "calibration.json"
    path.write_text(_dump(state.to_dict()))
    _record_phase(out, "calibrate", [path], time.perf_counter() - t0, cfg)
    print(f"calibrated {cfg.method} on {len(cal)} records: alpha={state.alpha} beta={state.beta}")
    return 0


def _load_state(out: Path) -> CalibrationState:
    p = out / "calibration.json"
    if not p.exists():
        raise MissingInput(f"{p} not found; run calibrate first")
    return CalibrationState.from_dict(json.loads(p.read_text()))


def cmd_predict(args) -> int:
    cfg = _load_cfg(args)
    kt = _kt(cfg, args)
    data = Path(args.data or cfg.out)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    _, test = _read_split(data, kt, cfg.strict)
    state = _load_state(Path(args.data or cfg.out))
    preds, raws = predict(state, test, kt, cfg.method, workers=args.workers or cfg.workers)
    path = out / f"predictions-{cfg.method}.jsonl"
    raw_path = out / "predictions-raw.jsonl"
    _write_predictions(path, test.ids, preds)
    _write_predictions(raw_path, test.ids, raws)
    _record_phase(out, "predict", [path, raw_path], time.perf_counter() - t0, cfg)
    print(f"wrote {len(preds)} prediction sets to {path}")
    return 0


def _read_predictions(path: Path, kt: KnowledgeTable) -> list[PredictionSets]:
    if not path.exists():
        raise MissingInput(f"{path} not found; run predict first")
    with open(path, encoding="utf-8") as fh:
        return [prediction_from_record(json.loads(line), kt) for line in fh if line.strip()]


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    kt = _kt(cfg, args)
    data = Path(args.data or cfg.out)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    _, test = _read_split(data, kt, cfg.strict)
    state = _load_state(data)
    preds = _read_predictions(data / f"predictions-{cfg.method}.jsonl", kt)
    raws = _read_predictions(data / "predictions-raw.jsonl", kt)
    rep = evaluate(preds, raws, test, kt, state, cfg.method)
    path = out / f"report-{cfg.method}.json"
    path.write_text(_dump(rep.to_dict()))
    _record_phase(out, "evaluate", [path], time.perf_counter() - t0, cfg)
    _print_report(rep)
    return 0


def cmd_budget(args) -> int:
    cfg = _load_cfg(args)
    if cfg.budgets is None:
        raise ConfigError("budgets: required (config or --budget-labels/--budget-concepts)")
    kt = _kt(cfg, args)
    data = Path(args.data or cfg.out)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cal, test = _read_split(data, kt, cfg.strict)
    b = cfg.budgets
    sel = budget_select(cal, test, (b.labels, b.concepts), b.grid_alpha, b.grid_beta, b.iterations,
                        cfg.seeds[0], cfg.mode, b.strategy)
    path = out / "budget.json"
    path.write_text(_dump(sel.to_dict()))
    _record_phase(out, "budget", [path], time.perf_counter() - t0, cfg)
    ta, tb = sel.targets
    print(f"mean alpha={sel.mean_alpha:.4f} beta={sel.mean_beta:.4f}; targets {ta:.4f} (labels) {tb:.4f} (concepts)")
    return 0


def cmd_verify(args) -> int:
    out = Path(args.out or "runs/verify")
    out.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed] if args.seed is not None else list(range(1, 11))
    t0 = time.perf_counter()
    results = run_all(seeds, args.instances)
    path = out / "verify.json"
    path.write_text(_dump([{"suite": r.name, "instances": r.instances, "failures": r.failures,
                            "examples": [list(e) if isinstance(e, tuple) else e for e in r.examples]}
                           for r in results]))
    _record_phase(out, "verify", [path], time.perf_counter() - t0)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.failures}/{r.instances} failures")
    require_all(results)
    return 0


def run_seed(cfg: RunConfig, kt: KnowledgeTable, seed: int, out: Path, workers: int = 1) -> dict:
    """All phases for one seed; returns phase timings."""
    out.mkdir(parents=True, exist_ok=True)
    times = {}
    t0 = time.perf_counter()
    if cfg.records:
        cal, test = split(ingest(cfg.records, kt, cfg.strict), cfg.cal_fraction)
    else:
        cal, test = generate(kt, cfg.predictor_spec(), cfg.n_cal, cfg.n_test, seed=seed)
    write_records(cal, out / "cal.jsonl")
    write_records(test, out / "test.jsonl")
    times["gen"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    state = _calibrate(cfg, cal, test, seed)
    (out / "calibration.json").write_text(_dump(state.to_dict()))
    times["calibrate"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    preds, raws = predict(state, test, kt, cfg.method, workers=workers)
    _write_predictions(out / f"predictions-{cfg.method}.jsonl", test.ids, preds)
    times["predict"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep = evaluate(preds, raws, test, kt, state, cfg.method)
    (out / f"report-{cfg.method}.json").write_text(_dump(rep.to_dict()))
    times["evaluate"] = time.perf_counter() - t0
    return times


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    kt = _kt(cfg, args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, timings, files = {}, {}, []
    for s in cfg.seeds:
        sd = out / f"seed_{s}"
        timings[str(s)] = run_seed(cfg, kt, s, sd, args.workers or cfg.workers)
        rp = sd / f"report-{cfg.method}.json"
        reports[str(s)] = json.loads(rp.read_text())
        files += [sd / "calibration.json", sd / f"predictions-{cfg.method}.jsonl", rp]
    payload = out / "reports.json"
    payload.write_text(_dump({"method": cfg.method, "reports": reports}))
    mpath = out / "manifest.json"
    m = {
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "digests": {str(f.relative_to(out)): _sha256(f) for f in files + [payload]},
        "reports": reports,
        "timings": timings,
    }
    mpath.write_text(_dump(m))
    print(f"{len(cfg.seeds)} seed(s) written to {out}")
    return 0


COLUMNS = [("labels", "consistency", "Y Const."), ("labels", "size", "Y Size"), ("labels", "coverage", "Y Cov."),
           ("concepts", "consistency", "C Const."), ("concepts", "size", "C Size"), ("concepts", "coverage", "C Cov.")]


def aggregate_reports(manifests: list[dict]) -> list[dict]:
    """Mean and std across seeds per method, one row per method."""
    by_method: dict[str, list[EvaluationReport]] = {}
    for m in manifests:
        for rep in m.get("reports", {}).values():
            r = EvaluationReport.from_dict(rep)
            by_method.setdefault(r.method, []).append(r)
    rows = []
    for method in sorted(by_method, key=lambda x: METHODS.index(x) if x in METHODS else len(METHODS)):
        reps = by_method[method]
        row = {"method": method, "seeds": len(reps)}
        for side, key, col in COLUMNS:
            mu, sd = summarize(getattr(getattr(r, side), key) for r in reps)
            row[col] = {"mean": mu, "std": sd}
        rows.append(row)
    return rows


def cmd_report(args) -> int:
    if not args.manifests:
        raise ConfigError("report: give at least one run manifest")
    manifests = []
    for p in args.manifests:
        p = Path(p)
        if p.is_dir():
            p = p / "manifest.json"
        if not p.exists():
            raise MissingInput(f"{p} not found")
        manifests.append(json.loads(p.read_text()))
    rows = aggregate_reports(manifests)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.json").write_text(_dump(rows))
    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seeds"] + [c for _, _, c in COLUMNS])
        for r in rows:
            w.writerow([r["method"], r["seeds"]] + [f"{r[c]['mean']:.4f} ± {r[c]['std']:.4f}" for _, _, c in COLUMNS])
    header = f"{'method':<10}" + "".join(f"{c:>18}" for _, _, c in COLUMNS)
    print(header)
    for r in rows:
        print(f"{r['method']:<10}" + "".join(f"{r[c]['mean']:>10.3f} ± {r[c]['std']:<5.3f}" for _, _, c in COLUMNS))
    return 0


def _print_report(rep: EvaluationReport) -> None:
    print(f"method {rep.method} on {rep.n} records")
    for side in ("labels", "concepts"):
        s = getattr(rep, side)
        print(f"  {side:<8} coverage {s.coverage:.4f}  size {s.size:.3f}  consistency {s.consistency:.4f}")
    print(f"  delta_ab {rep.delta_ab:.4f}  delta_de {rep.delta_de:.4f}")
    print(f"  bounds: labels {rep.bound_label:.4f}  concepts {rep.bound_concept:.4f}")


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coco-cp", description="Jointly revised conformal label and concept sets.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--budget-labels", type=float)
        sp.add_argument("--budget-concepts", type=float)
        sp.add_argument("--mode", choices=("avg", "product"))
        sp.add_argument("--strict", action="store_true")
        sp.add_argument("--out")
        sp.add_argument("--data", help="directory holding cal.jsonl/test.jsonl (defaults to --out)")
        sp.add_argument("--workers", type=int)

    for name, fn, hlp in (("gen", cmd_gen, "generate or split records"),
                          ("calibrate", cmd_calibrate, "fit calibration state"),
                          ("predict", cmd_predict, "emit per-record prediction sets"),
                          ("evaluate", cmd_evaluate, "score prediction sets"),
                          ("budget", cmd_budget, "bootstrap budget selection"),
                          ("run", cmd_run, "all phases for every configured seed")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        if name == "gen":
            sp.add_argument("--records", help="external record file to split instead of generating")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("verify", help="run the oracle suites")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--instances", type=int, default=100, help="random instances per seed and suite")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="aggregate run manifests into a mean ± std table")
    sp.add_argument("manifests", nargs="*")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CocoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
