"""Randomised oracle checks for the revision operator and the e-values.

Instances deliberately include ties (rows split over several labels),
all-zero rows, empty sets and whole-space sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import VerificationFailed
from .evalues import EValueCalibration, concept_evalue_of
from .knowledge import DigitSum, KnowledgeTable, abduce, compile_program, deduce_image, table_from_weights
from .revision import mutually_consistent, oracle_largest_consistent_pair, revise
from .sets import ConceptSet, ProductSet
from .synthio import PredictorSpec, generate


def random_table(rng: np.random.Generator, max_total: int = 64, max_labels: int = 6,
                 p_zero: float = 0.15, p_tie: float = 0.3) -> KnowledgeTable:
    """A random table with a mix of one-hot, tied and all-zero rows."""
    while True:
        k = int(rng.integers(1, 4))
        sizes = tuple(int(v) for v in rng.integers(1, 6 if max_total <= 125 else 11, size=k))
        if int(np.prod(sizes)) <= max_total:
            break
    n = int(np.prod(sizes))
    m = int(rng.integers(1, max_labels + 1))
    w = np.zeros((n, m))
    for i in range(n):
        u = rng.random()
        if u < p_zero:
            continue
        if u < p_zero + p_tie and m > 1:
            g = int(rng.integers(2, m + 1))
            w[i, rng.choice(m, size=g, replace=False)] = 1.0 / g
        elif u < p_zero + 2 * p_tie:
            raw = rng.integers(0, 3, size=m).astype(float)
            if raw.sum() == 0:
                raw[rng.integers(m)] = 1.0
            w[i] = raw / raw.sum()
        else:
            w[i, rng.integers(m)] = 1.0
    return table_from_weights(sizes, w)


def random_concept_set(rng: np.random.Generator, kt: KnowledgeTable):
    n = kt.concept_space.total_size
    u = rng.random()
    if u < 0.1:
        return ConceptSet.empty(kt.concept_space)
    if u < 0.2:
        return ConceptSet(kt.concept_space, np.arange(n))
    if u < 0.5:
        factors = [rng.choice(v, size=int(rng.integers(0 if rng.random() < 0.1 else 1, v + 1)), replace=False)
                   for v in kt.concept_space.domain_sizes]
        return ProductSet(kt.concept_space, factors)
    return ConceptSet(kt.concept_space, np.flatnonzero(rng.random(n) < rng.random()))


def random_label_set(rng: np.random.Generator, m: int) -> frozenset[int]:
    u = rng.random()
    if u < 0.1:
        return frozenset()
    if u < 0.2:
        return frozenset(range(m))
    return frozenset(np.flatnonzero(rng.random(m) < rng.random()).tolist())


@dataclass
class SuiteResult:
    name: str
    instances: int
    failures: int
    examples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _run(name: str, n: int, seed: int, check: Callable[[np.random.Generator, int], bool],
         max_total: int = 64) -> SuiteResult:
    res = SuiteResult(name, n, 0)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        if not check(rng, max_total):
            res.failures += 1
            if len(res.examples) < 5:
                res.examples.append(i)
    return res


def _instance(rng, max_total):
    kt = random_table(rng, max_total)
    return kt, random_concept_set(rng, kt), random_label_set(rng, kt.num_labels)


def check_fixed_point(rng, max_total=64) -> bool:
    kt, g, u = _instance(rng, max_total)
    g1, u1 = revise(g, u, kt)
    g2, u2 = revise(g1, u1, kt)
    return g1 == g2 and u1 == u2


def check_optimality(rng, max_total=1024) -> bool:
    kt, g, u = _instance(rng, max_total)
    rg, ru = revise(g, u, kt)
    og, ou = oracle_largest_consistent_pair(g, u, kt)
    mg, mu = revise(g, u, kt, materialize=True)
    return rg == og and ru == ou and rg == mg and ru == mu and mutually_consistent(rg, ru, kt)


def check_abduce_meet(rng, max_total=64) -> bool:
    kt = random_table(rng, max_total)
    a = random_label_set(rng, kt.num_labels)
    b = random_label_set(rng, kt.num_labels)
    lhs = abduce(a & b, kt).indices()
    rhs = np.intersect1d(abduce(a, kt).indices(), abduce(b, kt).indices())
    return bool(np.isin(lhs, rhs).all())


def check_preimage_roundtrip(rng, max_total=64) -> bool:
    """Every concept set with a label for each member lies in the preimage of its image."""
    kt = random_table(rng, max_total)
    g = random_concept_set(rng, kt).indices()
    g = g[kt.deduce_rows(g).any(axis=1)] if g.size else g
    back = abduce(deduce_image(ConceptSet(kt.concept_space, g), kt), kt).indices()
    return bool(np.isin(g, back).all())


def meet_counterexample() -> tuple[KnowledgeTable, frozenset, frozenset]:
    """One concept vector tied between labels 0 and 1, with A = {0} and B = {1}."""
    kt = table_from_weights((1,), [[0.5, 0.5]])
    return kt, frozenset({0}), frozenset({1})


def meet_converse_fails() -> bool:
    kt, a, b = meet_counterexample()
    lhs = abduce(a & b, kt).indices()
    rhs = np.intersect1d(abduce(a, kt).indices(), abduce(b, kt).indices())
    return lhs.size == 0 and rhs.size == 1


def evalue_validity(seeds, k: int = 2, base: int = 4, n_cal: int = 500, n_test: int = 2000,
                    tau: float = 1.0, sigma: float = 1.0, mode: str = "avg") -> dict:
    """Per-seed mean ground-truth e-values for labels and aggregated concepts."""
    kt = compile_program(DigitSum(k, base))
    spec = PredictorSpec(tau=tau, sigma=sigma)
    lab, con = [], []
    for s in seeds:
        cal, test = generate(kt, spec, n_cal, n_test, seed=s)
        ev = EValueCalibration.fit(cal)
        rows = np.arange(len(test))
        lab.append(ev.label_evalues(test.label_probs)[rows, test.y_star])
        con.append(concept_evalue_of(ev.concept_evalues(test.concept_probs), test.c_star, mode))
    out = {}
    for name, per_record in (("label", lab), ("concept", con)):
        v = np.array([x.mean() for x in per_record])
        if v.size > 1:
            se = float(v.std(ddof=1) / np.sqrt(v.size))
        else:
            # one seed: records share a calibration draw, so this understates the spread
            se = float(per_record[0].std(ddof=1) / np.sqrt(per_record[0].size))
        out[name] = {"per_seed": v.tolist(), "mean": float(v.mean()), "se": se,
                     "valid": bool(v.mean() <= 1.0 + 3.0 * se)}
    return out


def run_all(seeds=range(1, 11), instances: int = 100) -> list[SuiteResult]:
    """Every oracle suite over the given seeds; ``instances`` per seed and suite."""
    results = []
    for name, fn, cap in (("fixed_point", check_fixed_point, 64), ("optimality", check_optimality, 1024),
                          ("abduce_meet", check_abduce_meet, 64), ("preimage_roundtrip", check_preimage_roundtrip, 64)):
        total = SuiteResult(name, 0, 0)
        for s in seeds:
            r = _run(name, instances, s, fn, cap)
            total.instances += r.instances
            total.failures += r.failures
            total.examples += [(s, i) for i in r.examples]
        results.append(total)
    results.append(SuiteResult("abduce_meet_converse_counterexample", 1, 0 if meet_converse_fails() else 1))
    ev = evalue_validity(list(seeds))
    results.append(SuiteResult("evalue_validity", 2, sum(not ev[s]["valid"] for s in ("label", "concept"))))
    return results


def require_all(results) -> None:
    bad = [r.name for r in results if not r.passed]
    if bad:
        raise VerificationFailed(f"oracle suites failed: {', '.join(bad)}")
