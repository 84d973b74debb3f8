"""Joint revision of label and concept sets, one-sided baselines, oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import MissingInput, VerificationFailed
from .knowledge import KnowledgeTable, _label_mask, abduce, deduce_image
from .records import FactorizedConceptDistribution
from .sets import AnyConceptSet, ConceptSet, ConceptSpace, ProductSet, as_concept_set

METHODS = ("raw", "to", "tab", "co", "cde", "rpb", "coco", "coco-star")


@dataclass
class PredictionSets:
    label_set: frozenset[int]
    concept_set: AnyConceptSet
    method: str = "raw"
    provenance: dict = field(default_factory=dict)

    @property
    def label_size(self) -> int:
        return len(self.label_set)

    @property
    def concept_size(self) -> int:
        return self.concept_set.size


def abduction_set(labels: Iterable[int], kt: KnowledgeTable, cap: Optional[int] = None) -> ConceptSet:
    return abduce(labels, kt, cap)


def deduction_set(concepts, kt: KnowledgeTable, cap: Optional[int] = None) -> frozenset[int]:
    return deduce_image(concepts, kt, cap)


def revise(concepts, labels: Iterable[int], kt: KnowledgeTable, cap: Optional[int] = None,
           materialize: bool = False) -> tuple[ConceptSet, frozenset[int]]:
    """``(Γ ∩ abduce(Υ), Υ ∩ deduce_image(Γ))``, applied once.

    By default members of Γ are checked against a label bitmap of Υ, which
    never enumerates the preimage of Υ. ``materialize=True`` builds
    ``abduce(Υ)`` and intersects instead; both routes give the same sets.
    """
    cap = kt.cap if cap is None else cap
    gamma = as_concept_set(kt.concept_space, concepts)
    upsilon = _label_mask(labels, kt.num_labels)
    idx = gamma.indices(cap)
    if materialize:
        ab = abduce(np.flatnonzero(upsilon), kt, cap).indices()
        new_gamma = ConceptSet(kt.concept_space, np.intersect1d(idx, ab, assume_unique=True))
        new_labels = frozenset(np.flatnonzero(upsilon).tolist()) & deduce_image(gamma, kt, cap)
        return new_gamma, new_labels
    if idx.size == 0 or not upsilon.any():
        return ConceptSet.empty(kt.concept_space), frozenset()
    ded = kt.deduce_rows(idx)
    keep = ded[:, upsilon].any(axis=1)
    image = ded.any(axis=0)
    return ConceptSet(kt.concept_space, idx[keep]), frozenset(np.flatnonzero(upsilon & image).tolist())


def argmax_labels(label_probs, tol: float = 1e-12) -> frozenset[int]:
    p = np.asarray(label_probs, dtype=np.float64)
    return frozenset(np.flatnonzero(p >= p.max() - tol).tolist())


def argmax_concepts(space: ConceptSpace, p: FactorizedConceptDistribution, tol: float = 1e-12) -> ProductSet:
    """All maximisers of the factorised joint: the product of per-concept tie sets."""
    return ProductSet(space, [np.flatnonzero(pj >= pj.max() - tol) for pj in p.per_concept])


def apply_method(method: str, labels: Optional[Iterable[int]], concepts, kt: KnowledgeTable,
                 point_label: Optional[frozenset[int]] = None, point_concepts=None,
                 cap: Optional[int] = None, provenance: Optional[dict] = None,
                 check: bool = True) -> PredictionSets:
    """Build one method's output from raw conformal sets.

    ``labels``/``concepts`` are the raw conformal sets; ``point_label`` and
    ``point_concepts`` are the argmax tie sets used by the one-sided
    baselines that leave a side unconformalised.
    """
    method = method.lower()
    prov = dict(provenance or {})

    def need(x, name):
        if x is None:
            raise MissingInput(f"method {method!r} needs {name}")
        return x

    if method == "raw":
        ups, gam = frozenset(need(labels, "a label set")), as_concept_set(kt.concept_space, need(concepts, "a concept set"))
    elif method == "to":
        ups = frozenset(need(labels, "a label set"))
        gam = as_concept_set(kt.concept_space, need(point_concepts, "the argmax concept vector"))
    elif method == "tab":
        ups = frozenset(need(labels, "a label set"))
        gam = abduce(ups, kt, cap)
    elif method == "co":
        ups = frozenset(need(point_label, "the argmax label"))
        gam = as_concept_set(kt.concept_space, need(concepts, "a concept set"))
    elif method == "cde":
        gam = as_concept_set(kt.concept_space, need(concepts, "a concept set"))
        ups = deduce_image(gam, kt, cap)
    elif method == "rpb":
        gam = as_concept_set(kt.concept_space, need(concepts, "a concept set"))
        ups = frozenset(need(labels, "a label set")) & deduce_image(gam, kt, cap)
    elif method in ("coco", "coco-star"):
        gam, ups = revise(need(concepts, "a concept set"), need(labels, "a label set"), kt, cap)
        if check:
            assert_mutually_consistent(gam, ups, kt, cap)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return PredictionSets(ups, gam, method, prov)


def mutually_consistent(concepts, labels: Iterable[int], kt: KnowledgeTable, cap: Optional[int] = None) -> bool:
    """Every concept deduces into the label set and every label is deduced by some concept."""
    cap = kt.cap if cap is None else cap
    idx = as_concept_set(kt.concept_space, concepts).indices(cap)
    mask = _label_mask(labels, kt.num_labels)
    if idx.size == 0:
        return not mask.any()
    ded = kt.deduce_rows(idx)
    return bool(ded[:, mask].any(axis=1).all() and not (mask & ~ded.any(axis=0)).any())


def assert_mutually_consistent(concepts, labels, kt: KnowledgeTable, cap: Optional[int] = None) -> None:
    if not mutually_consistent(concepts, labels, kt, cap):
        raise VerificationFailed("revised sets are not mutually consistent")


def oracle_largest_consistent_pair(concepts, labels: Iterable[int], kt: KnowledgeTable,
                                   cap: Optional[int] = None) -> tuple[ConceptSet, frozenset[int]]:
    """Greatest consistent pair inside ``(Γ, Υ)`` by pruning to a fixed point.

    Repeatedly drops concept vectors that deduce nothing in the current label
    set and labels no remaining concept vector deduces, until neither side
    changes. Written with Python sets on purpose, independent of
    :func:`revise`.
    """
    cap = kt.cap if cap is None else cap
    idx = as_concept_set(kt.concept_space, concepts).indices(cap)
    ded = {int(i): set(np.flatnonzero(row).tolist()) for i, row in zip(idx, kt.deduce_rows(idx))}
    g = set(ded)
    u = {int(y) for y in labels}
    while True:
        g2 = {c for c in g if ded[c] & u}
        u2 = {y for y in u if any(y in ded[c] for c in g2)}
        if g2 == g and u2 == u:
            return ConceptSet(kt.concept_space, sorted(g)), frozenset(u)
        g, u = g2, u2
