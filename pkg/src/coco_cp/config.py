"""Run configuration read from YAML, validated with field paths in errors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import ConfigError
from .evalues import ALPHA_GRID, BETA_GRID, MODES
from .knowledge import (
    ActiveCount,
    AttributeRules,
    DigitSum,
    KnowledgeProgram,
    KnowledgeTable,
    MajorityVote,
    Rule,
    SumParity,
    cifar_attribute_rules,
    compile_program,
    load_table,
)
from .revision import METHODS
from .sets import DEFAULT_CAP
from .synthio import PredictorSpec, parity_preserving_shift


@dataclass
class BudgetConfig:
    labels: float
    concepts: float
    grid_alpha: tuple[float, ...] = ALPHA_GRID
    grid_beta: tuple[float, ...] = BETA_GRID
    iterations: int = 100
    strategy: str = "per-side"


@dataclass
class RunConfig:
    knowledge: dict
    method: str = "coco"
    alpha: Optional[float] = 0.1
    beta: Optional[float] = 0.1
    budgets: Optional[BudgetConfig] = None
    seeds: tuple[int, ...] = (0,)
    predictor: dict = field(default_factory=dict)
    n_cal: int = 2000
    n_test: int = 8000
    records: Optional[str] = None
    cal_fraction: float = 0.2
    cap: int = DEFAULT_CAP
    mode: str = "avg"
    strict: bool = False
    workers: int = 1
    out: str = "runs/out"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        if self.budgets is not None:
            d["budgets"]["grid_alpha"] = list(self.budgets.grid_alpha)
            d["budgets"]["grid_beta"] = list(self.budgets.grid_beta)
        return d

    def knowledge_table(self, base: Optional[Path] = None) -> KnowledgeTable:
        return build_knowledge(self.knowledge, self.cap, base)

    def predictor_spec(self) -> PredictorSpec:
        return build_predictor(self.predictor)


def _err(path: str, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def _int(d: dict, key: str, path: str, default=None, lo: int = 1) -> int:
    v = d.get(key, default)
    where = f"{path}.{key}" if path else key
    if v is None:
        raise _err(where, "required")
    if isinstance(v, bool) or not isinstance(v, int):
        raise _err(where, f"expected an integer, got {v!r}")
    if v < lo:
        raise _err(where, f"must be >= {lo}")
    return v


def _level(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 < float(v) < 1.0:
        raise _err(path, f"expected a level in (0, 1), got {v!r}")
    return float(v)


def build_program(d: dict, path: str = "knowledge") -> KnowledgeProgram:
    if not isinstance(d, dict) or "type" not in d:
        raise _err(f"{path}.type", "required")
    t = d["type"]
    if t == "digit_sum":
        return DigitSum(_int(d, "k", path, 2), _int(d, "base", path, 10))
    if t == "sum_parity":
        return SumParity(_int(d, "k", path, 2), _int(d, "base", path, 10))
    if t == "active_count":
        return ActiveCount(_int(d, "k", path, 4))
    if t == "majority_vote":
        values = _int(d, "values", path, 4)
        pr = d.get("priority", list(range(values)))
        cp = d.get("conflict_pair", [0, 1])
        prog = MajorityVote(_int(d, "k", path, 5), values, tuple(pr), None if cp is None else tuple(cp))
    elif t == "attribute_rules":
        if d.get("preset") == "cifar10":
            prog = cifar_attribute_rules(d.get("unmatched", "consistent"))
        else:
            rules = []
            for i, r in enumerate(d.get("rules") or []):
                try:
                    rules.append(Rule(tuple(r["labels"]), tuple((int(a), bool(v)) for a, v in r["literals"])))
                except (KeyError, TypeError, ValueError):
                    raise _err(f"{path}.rules[{i}]", "expected {labels: [...], literals: [[attr, bool], ...]}") from None
            sig = d.get("signatures")
            prog = AttributeRules(
                _int(d, "num_attributes", path), _int(d, "num_labels", path), tuple(rules),
                d.get("unmatched", "consistent"), None if sig is None else tuple(tuple(s) for s in sig),
            )
    else:
        raise _err(f"{path}.type", f"unknown knowledge type {t!r}")
    try:
        prog.validate()
    except ConfigError as exc:
        raise _err(path, str(exc)) from None
    return prog


def build_knowledge(d: dict, cap: int = DEFAULT_CAP, base: Optional[Path] = None) -> KnowledgeTable:
    if isinstance(d, dict) and d.get("type") == "explicit_table":
        if "path" not in d:
            raise _err("knowledge.path", "required")
        sizes = d.get("domain_sizes")
        if not isinstance(sizes, list) or not sizes:
            raise _err("knowledge.domain_sizes", "required list of domain sizes")
        p = Path(d["path"])
        if base is not None and not p.is_absolute():
            p = base / p
        return load_table(p, sizes, cap)
    return compile_program(build_program(d), cap)


def build_predictor(d: dict, path: str = "predictor") -> PredictorSpec:
    d = dict(d or {})
    shortcut = d.get("shortcut")
    if shortcut == "parity_shift":
        shortcut = parity_preserving_shift(int(d.get("base", 10)))
    d.pop("base", None)
    kw: dict[str, Any] = {}
    for key in ("tau", "sigma"):
        if key in d:
            v = d[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise _err(f"{path}.{key}", f"expected a nonnegative number, got {v!r}")
            kw[key] = float(v)
    if shortcut is not None:
        kw["shortcut"] = tuple(int(x) for x in shortcut)
    if d.get("shortcut_concepts") is not None:
        kw["shortcut_concepts"] = tuple(int(x) for x in d["shortcut_concepts"])
    if d.get("confusion") is not None:
        kw["confusion"] = tuple(tuple(tuple(row) for row in m) for m in d["confusion"])
    if "prior" in d:
        pr = d["prior"]
        kw["prior"] = pr if isinstance(pr, str) else tuple(float(x) for x in pr)
    unknown = set(d) - {"tau", "sigma", "shortcut", "shortcut_concepts", "confusion", "prior"}
    if unknown:
        raise _err(f"{path}.{sorted(unknown)[0]}", "unknown field")
    return PredictorSpec(**kw)


_TOP = {"knowledge", "method", "alpha", "beta", "budgets", "seeds", "predictor", "n_cal", "n_test",
        "records", "cal_fraction", "cap", "mode", "strict", "workers", "out"}


def parse_config(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(d) - _TOP
    if unknown:
        raise _err(sorted(unknown)[0], "unknown field")
    if "knowledge" not in d:
        raise _err("knowledge", "required")
    if not isinstance(d["knowledge"], dict):
        raise _err("knowledge", "expected a mapping")
    if d["knowledge"].get("type") != "explicit_table":
        build_program(d["knowledge"])
    method = d.get("method", "coco")
    if method not in METHODS:
        raise _err("method", f"expected one of {', '.join(METHODS)}, got {method!r}")
    budgets = None
    if d.get("budgets") is not None:
        b = d["budgets"]
        if not isinstance(b, dict):
            raise _err("budgets", "expected a mapping")
        for key in ("labels", "concepts"):
            v = b.get(key)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise _err(f"budgets.{key}", f"expected a positive number, got {v!r}")
        ga = tuple(_level(v, f"budgets.grid_alpha[{i}]") for i, v in enumerate(b.get("grid_alpha", ALPHA_GRID)))
        gb = tuple(_level(v, f"budgets.grid_beta[{i}]") for i, v in enumerate(b.get("grid_beta", BETA_GRID)))
        if not ga:
            raise _err("budgets.grid_alpha", "must be nonempty")
        if not gb:
            raise _err("budgets.grid_beta", "must be nonempty")
        strategy = b.get("strategy", "per-side")
        if strategy not in ("per-side", "lexicographic"):
            raise _err("budgets.strategy", "expected per-side or lexicographic")
        budgets = BudgetConfig(float(b["labels"]), float(b["concepts"]), ga, gb,
                               _int(b, "iterations", "budgets", 100), strategy)
    alpha = d.get("alpha", None if budgets else 0.1)
    beta = d.get("beta", None if budgets else 0.1)
    if method == "coco-star":
        if (budgets is None) == (alpha is None or beta is None):
            raise _err("budgets", "coco-star needs exactly one of levels (alpha, beta) or budgets")
        if budgets is not None:
            alpha = beta = None
    elif alpha is None or beta is None:
        raise _err("alpha" if alpha is None else "beta", f"required for method {method}")
    if alpha is not None:
        alpha = _level(alpha, "alpha")
    if beta is not None:
        beta = _level(beta, "beta")
    seeds = d.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        raise _err("seeds", "expected a nonempty list of nonnegative integers")
    mode = d.get("mode", "avg")
    if mode not in MODES:
        raise _err("mode", f"expected one of {MODES}")
    cf = d.get("cal_fraction", 0.2)
    if not isinstance(cf, (int, float)) or not 0.0 < cf < 1.0:
        raise _err("cal_fraction", "expected a value in (0, 1)")
    cfg = RunConfig(
        knowledge=d["knowledge"], method=method, alpha=alpha, beta=beta, budgets=budgets,
        seeds=tuple(seeds), predictor=d.get("predictor") or {},
        n_cal=_int(d, "n_cal", "", 2000), n_test=_int(d, "n_test", "", 8000),
        records=d.get("records"), cal_fraction=float(cf), cap=_int(d, "cap", "", DEFAULT_CAP),
        mode=mode, strict=bool(d.get("strict", False)), workers=_int(d, "workers", "", 1),
        out=str(d.get("out", "runs/out")),
    )
    build_predictor(cfg.predictor)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            d = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(d or {})


def override(cfg: RunConfig, **kw) -> RunConfig:
    """Apply CLI flags on top of a config; ``None`` values are ignored."""
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw)
