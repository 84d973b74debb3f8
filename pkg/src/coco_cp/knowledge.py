"""Prior knowledge as a concept-to-label weight table.

A :class:`KnowledgeTable` holds ``W[c, y]``, the mass the knowledge assigns to
label ``y`` given concept vector ``c``. Deduction is the set-valued argmax of a
row, abduction is its preimage. Built-in programs cover the groundings used
in the experiments (digit sums, parity, symptom counts, majority vote with a
priority tie-break, attribute rules with shared signatures).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import CapExceeded, DimensionMismatch, EmptyDataset, InvalidProgram, ParseError
from .records import FactorizedConceptDistribution
from .sets import DEFAULT_CAP, ConceptSet, ConceptSpace, LabelSpace, as_concept_set

ROW_SUM_TOL = 1e-9
# labels within this distance of the row max count as tied
TIE_TOL = 1e-12


# --------------------------------------------------------------------------
# Programs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DigitSum:
    """Label is the sum of ``k`` digits in base ``base``."""

    k: int = 2
    base: int = 10

    def spaces(self):
        return ConceptSpace((self.base,) * self.k), LabelSpace((self.base - 1) * self.k + 1)

    def validate(self):
        if self.k < 1 or self.base < 1:
            raise InvalidProgram(f"DigitSum needs k >= 1 and base >= 1, got {self}")

    def weights(self, vectors: np.ndarray) -> np.ndarray:
        return _one_hot(vectors.sum(axis=1), self.spaces()[1].num_labels)


@dataclass(frozen=True)
class SumParity:
    k: int = 2
    base: int = 10

    def spaces(self):
        return ConceptSpace((self.base,) * self.k), LabelSpace(2)

    def validate(self):
        if self.k < 1 or self.base < 1:
            raise InvalidProgram(f"SumParity needs k >= 1 and base >= 1, got {self}")

    def weights(self, vectors: np.ndarray) -> np.ndarray:
        return _one_hot(vectors.sum(axis=1) % 2, 2)


@dataclass(frozen=True)
class ActiveCount:
    """``k`` binary symptoms; the label counts the active ones."""

    k: int = 4

    def spaces(self):
        return ConceptSpace((2,) * self.k), LabelSpace(self.k + 1)

    def validate(self):
        if self.k < 1:
            raise InvalidProgram("ActiveCount needs k >= 1")

    def weights(self, vectors: np.ndarray) -> np.ndarray:
        return _one_hot(vectors.sum(axis=1), self.k + 1)


@dataclass(frozen=True)
class MajorityVote:
    """Most frequent value among ``k`` concepts, one extra ``conflict`` label.

    Labels ``0..values-1`` are the values themselves, label ``values`` is the
    conflict label. Conflict is checked first: it fires when both members of
    ``conflict_pair`` attain the maximum count. Remaining ties go to the
    earliest value in ``priority``.
    """

    k: int = 5
    values: int = 4
    priority: tuple[int, ...] = (0, 1, 2, 3)
    conflict_pair: Optional[tuple[int, int]] = (0, 1)

    def spaces(self):
        return ConceptSpace((self.values,) * self.k), LabelSpace(self.values + 1)

    @property
    def conflict_label(self) -> int:
        return self.values

    def validate(self):
        if self.k < 1 or self.values < 1:
            raise InvalidProgram("MajorityVote needs k >= 1 and values >= 1")
        if sorted(self.priority) != list(range(self.values)):
            raise InvalidProgram(f"priority {self.priority} is not a permutation of 0..{self.values - 1}")
        if self.conflict_pair is not None:
            a, b = self.conflict_pair
            if a == b or not (0 <= a < self.values and 0 <= b < self.values):
                raise InvalidProgram(f"bad conflict pair {self.conflict_pair}")

    def weights(self, vectors: np.ndarray) -> np.ndarray:
        counts = (vectors[:, :, None] == np.arange(self.values)).sum(axis=1)
        top = counts.max(axis=1)
        at_top = counts == top[:, None]
        order = np.asarray(self.priority)
        winner = order[np.argmax(at_top[:, order], axis=1)]
        if self.conflict_pair is not None:
            a, b = self.conflict_pair
            winner = np.where(at_top[:, a] & at_top[:, b], self.conflict_label, winner)
        return _one_hot(winner, self.values + 1)


@dataclass(frozen=True)
class Rule:
    """``labels`` hold exactly when every ``(attribute, value)`` literal holds."""

    labels: tuple[int, ...]
    literals: tuple[tuple[int, bool], ...]


@dataclass(frozen=True)
class AttributeRules:
    """Binary attributes mapped to labels through a rule list.

    A concept vector's mass is split equally over every label of every rule
    it satisfies, so a rule naming several labels (a shared signature) yields
    ``1/g`` per label. Vectors matching no rule fall back per ``unmatched``:
    ``"consistent"`` splits over labels of rules that negate none of the
    active attributes, ``"infeasible"`` leaves the row empty.

    ``signatures`` optionally lists one canonical vector per label, used by
    the synthetic generator to draw ground truth.
    """

    num_attributes: int
    num_labels: int
    rules: tuple[Rule, ...]
    unmatched: str = "consistent"
    signatures: Optional[tuple[tuple[int, ...], ...]] = None
    label_names: Optional[tuple[str, ...]] = None
    attribute_names: Optional[tuple[str, ...]] = None

    def spaces(self):
        return ConceptSpace((2,) * self.num_attributes), LabelSpace(self.num_labels)

    def validate(self):
        if self.unmatched not in ("consistent", "infeasible"):
            raise InvalidProgram(f"unknown unmatched policy {self.unmatched!r}")
        for r in self.rules:
            if not r.labels or any(not 0 <= y < self.num_labels for y in r.labels):
                raise InvalidProgram(f"rule {r} names labels outside 0..{self.num_labels - 1}")
            if any(not 0 <= a < self.num_attributes for a, _ in r.literals):
                raise InvalidProgram(f"rule {r} names attributes outside 0..{self.num_attributes - 1}")
        if self.signatures is not None:
            if len(self.signatures) != self.num_labels:
                raise InvalidProgram("need exactly one signature per label")
            if any(len(s) != self.num_attributes or any(v not in (0, 1) for v in s) for s in self.signatures):
                raise InvalidProgram("signatures must be binary vectors over all attributes")

    def weights(self, vectors: np.ndarray) -> np.ndarray:
        n = vectors.shape[0]
        active = vectors.astype(bool)
        hit = np.zeros((n, self.num_labels), dtype=bool)
        fallback = np.zeros((n, self.num_labels), dtype=bool)
        for r in self.rules:
            ok = np.ones(n, dtype=bool)
            not_contradicted = np.ones(n, dtype=bool)
            for a, val in r.literals:
                ok &= active[:, a] == val
                if not val:
                    not_contradicted &= ~active[:, a]
            hit[:, list(r.labels)] |= ok[:, None]
            fallback[:, list(r.labels)] |= not_contradicted[:, None]
        if self.unmatched == "consistent":
            none = ~hit.any(axis=1)
            hit[none] = fallback[none]
        counts = hit.sum(axis=1, keepdims=True)
        return np.divide(hit, counts, out=np.zeros((n, self.num_labels)), where=counts > 0)


@dataclass(frozen=True)
class ExplicitTable:
    domain_sizes: tuple[int, ...]
    num_labels: int
    rows: tuple[tuple[float, ...], ...]

    def spaces(self):
        return ConceptSpace(tuple(self.domain_sizes)), LabelSpace(self.num_labels)

    def validate(self):
        space, _ = self.spaces()
        if len(self.rows) != space.total_size:
            raise InvalidProgram(f"{len(self.rows)} rows for a concept space of size {space.total_size}")
        if any(len(r) != self.num_labels for r in self.rows):
            raise InvalidProgram(f"every row needs {self.num_labels} weights")

    def weights(self, vectors: np.ndarray) -> np.ndarray:
        space, _ = self.spaces()
        table = np.asarray(self.rows, dtype=np.float64).reshape(space.total_size, self.num_labels)
        return table[space.indices(vectors)]


KnowledgeProgram = Union[DigitSum, SumParity, ActiveCount, MajorityVote, AttributeRules, ExplicitTable]


def _one_hot(labels: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], m))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


CIFAR_LABELS = ("airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck")
CIFAR_ATTRIBUTES = ("whl", "met", "wng", "ani", "hai", "hrn", "snt")


def cifar_attribute_rules(unmatched: str = "consistent") -> AttributeRules:
    """Seven visual attributes over ten classes; two pairs share a signature."""
    a = {name: i for i, name in enumerate(CIFAR_ATTRIBUTES)}
    y = {name: i for i, name in enumerate(CIFAR_LABELS)}

    def rule(labels, **lits):
        return Rule(tuple(y[l] for l in labels), tuple((a[k], v) for k, v in lits.items()))

    rules = (
        rule(["airplane"], met=True, ani=False, wng=True),
        rule(["automobile", "truck"], whl=True, met=True, wng=False, ani=False),
        rule(["bird"], ani=True, met=False, wng=True),
        rule(["frog"], ani=True, met=False, hai=False),
        rule(["deer"], ani=True, met=False, wng=False, hai=True, hrn=True),
        rule(["cat"], ani=True, met=False, wng=False, hai=True, hrn=False, snt=False),
        rule(["dog", "horse"], ani=True, met=False, wng=False, hai=True, hrn=False, snt=True),
        rule(["ship"], met=True, ani=False, whl=False, wng=False),
    )

    def sig(*on):
        return tuple(int(n in on) for n in CIFAR_ATTRIBUTES)

    signatures = (
        sig("met", "wng"),                       # airplane
        sig("whl", "met"),                       # automobile
        sig("ani", "wng", "hai"),                # bird
        sig("ani", "hai"),                       # cat
        sig("ani", "hai", "hrn", "snt"),         # deer
        sig("ani", "hai", "snt"),                # dog
        sig("ani"),                              # frog
        sig("ani", "hai", "snt"),                # horse
        sig("met"),                              # ship
        sig("whl", "met"),                       # truck
    )
    return AttributeRules(
        num_attributes=7,
        num_labels=10,
        rules=rules,
        unmatched=unmatched,
        signatures=signatures,
        label_names=CIFAR_LABELS,
        attribute_names=CIFAR_ATTRIBUTES,
    )


# --------------------------------------------------------------------------
# Table
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KnowledgeTable:
    """Compiled knowledge. Dense when ``weights`` is set, otherwise rows are
    evaluated on demand by ``row_fn`` (vectorised over concept vectors)."""

    concept_space: ConceptSpace
    label_space: LabelSpace
    weights: Optional[np.ndarray] = None
    row_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    cap: int = DEFAULT_CAP
    program: Optional[KnowledgeProgram] = None

    def __post_init__(self):
        if self.weights is None and self.row_fn is None:
            raise InvalidProgram("a knowledge table needs dense weights or a row evaluator")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
            expected = (self.concept_space.total_size, self.label_space.num_labels)
            if w.shape != expected:
                raise DimensionMismatch(f"weight table shape {w.shape}, expected {expected}")
            _check_rows(w)

    @property
    def dense(self) -> bool:
        return self.weights is not None

    @property
    def num_labels(self) -> int:
        return self.label_space.num_labels

    def rows(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self.dense:
            return self.weights[idx]
        w = self.row_fn(self.concept_space.vectors(idx))
        _check_rows(w)
        return w

    def require_dense(self, what: str) -> np.ndarray:
        if not self.dense:
            raise CapExceeded(what, self.concept_space.total_size, self.cap)
        return self.weights

    @cached_property
    def _dense_argmax(self) -> np.ndarray:
        m = _argmax_mask(self.weights)
        m.setflags(write=False)
        return m

    def deduce_rows(self, idx: np.ndarray) -> np.ndarray:
        """Boolean ``(len(idx), m)`` matrix of deduced labels per concept vector."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.dense:
            return self._dense_argmax[idx]
        return _argmax_mask(self.rows(idx))

    @cached_property
    def feasible(self) -> np.ndarray:
        """Flat indices of concept vectors with a nonzero row."""
        return np.flatnonzero(self.require_dense("feasible rows").sum(axis=1) > 0)

    @cached_property
    def is_deterministic(self) -> bool:
        w = self.require_dense("determinism check")
        nz = w[w.sum(axis=1) > 0]
        return bool(np.all((nz == 0) | (nz == 1)) and np.all((nz == 1).sum(axis=1) == 1))

    def digest_bytes(self) -> bytes:
        return self.require_dense("digest").tobytes()


def _check_rows(w: np.ndarray) -> None:
    if np.any(w < 0) or np.any(w > 1 + ROW_SUM_TOL):
        raise InvalidProgram("weights must lie in [0, 1]")
    s = w.sum(axis=1)
    bad = (s != 0) & (np.abs(s - 1.0) > ROW_SUM_TOL)
    if np.any(bad):
        raise InvalidProgram(f"row {int(np.flatnonzero(bad)[0])} sums to {s[bad][0]}, not 0 or 1")


def _argmax_mask(w: np.ndarray) -> np.ndarray:
    top = w.max(axis=1, keepdims=True)
    return (w >= top - TIE_TOL) & (top > 0)


def compile_program(program: KnowledgeProgram, cap: int = DEFAULT_CAP) -> KnowledgeTable:
    """Compile a program into a table, dense when the space fits under ``cap``."""
    program.validate()
    cspace, lspace = program.spaces()
    if cspace.total_size <= cap:
        w = program.weights(cspace.all_vectors(cap))
        return KnowledgeTable(cspace, lspace, weights=w, cap=cap, program=program)
    if isinstance(program, ExplicitTable):
        raise CapExceeded("explicit table", cspace.total_size, cap)
    return KnowledgeTable(cspace, lspace, row_fn=program.weights, cap=cap, program=program)


def table_from_weights(domain_sizes: Sequence[int], weights, cap: int = DEFAULT_CAP) -> KnowledgeTable:
    w = np.asarray(weights, dtype=np.float64)
    space = ConceptSpace(tuple(domain_sizes))
    space.check_cap(cap, "explicit table")
    return KnowledgeTable(space, LabelSpace(w.shape[1]), weights=w, cap=cap)


def load_table(path, domain_sizes: Sequence[int], cap: int = DEFAULT_CAP) -> KnowledgeTable:
    """Read whitespace-separated label weights, one row per concept vector
    in mixed-radix order. Blank lines and ``#`` comments are skipped."""
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals = [float(t) for t in line.split()]
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(path, lineno, f"expected {width} weights, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ParseError(path, 0, "no rows")
    space = ConceptSpace(tuple(domain_sizes))
    if len(rows) != space.total_size:
        raise DimensionMismatch(f"{path}: {len(rows)} rows, concept space has {space.total_size}")
    return table_from_weights(domain_sizes, rows, cap)


def save_table(kt: KnowledgeTable, path) -> None:
    w = kt.require_dense("save table")
    with open(path, "w", encoding="utf-8") as fh:
        for row in w:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


# --------------------------------------------------------------------------
# Deduction and abduction
# --------------------------------------------------------------------------

def deduce(c: Sequence[int], kt: KnowledgeTable) -> frozenset[int]:
    """Labels attaining the row maximum; empty for an all-zero row."""
    i = kt.concept_space.index(c)
    return frozenset(np.flatnonzero(kt.deduce_rows(np.array([i]))[0]).tolist())


def _label_mask(labels: Iterable[int], m: int) -> np.ndarray:
    mask = np.zeros(m, dtype=bool)
    for y in labels:
        y = int(y)
        if not 0 <= y < m:
            raise DimensionMismatch(f"label {y} outside 0..{m - 1}")
        mask[y] = True
    return mask


def abduce(labels: Iterable[int], kt: KnowledgeTable, cap: Optional[int] = None) -> ConceptSet:
    """All concept vectors whose deduced labels meet ``labels``."""
    cap = kt.cap if cap is None else cap
    mask = _label_mask(labels, kt.num_labels)
    if not mask.any():
        return ConceptSet.empty(kt.concept_space)
    kt.concept_space.check_cap(cap, "abduction scan")
    if kt.dense:
        hit = kt._dense_argmax[:, mask].any(axis=1)
    else:
        hit = kt.deduce_rows(np.arange(kt.concept_space.total_size))[:, mask].any(axis=1)
    idx = np.flatnonzero(hit)
    if idx.size > cap:
        raise CapExceeded("abduced preimage", idx.size, cap)
    return ConceptSet(kt.concept_space, idx)


def deduce_image(concepts, kt: KnowledgeTable, cap: Optional[int] = None) -> frozenset[int]:
    """Union of :func:`deduce` over a concept set."""
    cap = kt.cap if cap is None else cap
    idx = as_concept_set(kt.concept_space, concepts).indices(cap)
    if idx.size == 0:
        return frozenset()
    return frozenset(np.flatnonzero(kt.deduce_rows(idx).any(axis=0)).tolist())


# --------------------------------------------------------------------------
# Marginalisation and soundness gaps
# --------------------------------------------------------------------------

def joint_concept_probs(per_concept: Sequence[np.ndarray]) -> np.ndarray:
    """Batched outer product: ``(n, V_1) x ... x (n, V_k) -> (n, prod V_j)``."""
    out = np.asarray(per_concept[0], dtype=np.float64)
    single = out.ndim == 1
    if single:
        per_concept = [np.asarray(p)[None, :] for p in per_concept]
        out = per_concept[0]
    for p in per_concept[1:]:
        out = (out[:, :, None] * np.asarray(p, dtype=np.float64)[:, None, :]).reshape(out.shape[0], -1)
    return out[0] if single else out


def marginal_label_distribution(p: FactorizedConceptDistribution, kt: KnowledgeTable) -> np.ndarray:
    """``p(y|x) = sum_c p(c|x) W[c, y]`` by exhaustive enumeration."""
    if p.domain_sizes != kt.concept_space.domain_sizes:
        raise DimensionMismatch(f"distribution over {p.domain_sizes}, knowledge over {kt.concept_space.domain_sizes}")
    w = kt.require_dense("label marginalisation")
    return joint_concept_probs(p.per_concept) @ w


def marginal_label_distributions(per_concept: Sequence[np.ndarray], kt: KnowledgeTable,
                                 chunk_elems: int = 4_000_000) -> np.ndarray:
    """Batched :func:`marginal_label_distribution` over ``(n, V_j)`` arrays."""
    w = kt.require_dense("label marginalisation")
    n = per_concept[0].shape[0]
    step = max(1, chunk_elems // max(1, kt.concept_space.total_size))
    out = np.empty((n, kt.num_labels))
    for s in range(0, n, step):
        out[s:s + step] = joint_concept_probs([p[s:s + step] for p in per_concept]) @ w
    return out


def estimate_deltas(records, kt: KnowledgeTable) -> tuple[float, float]:
    """Empirical abductive and deductive soundness.

    ``records`` is anything with ``c_star`` (n, k) and ``y_star`` (n,) arrays.
    Deduction scores a tie set containing the truth as ``1/|tie set|``.
    """
    if records.c_star is None:
        raise EmptyDataset("soundness estimates need concept annotations")
    n = len(records.y_star)
    if n == 0:
        raise EmptyDataset("no records")
    idx = kt.concept_space.indices(records.c_star)
    ded = kt.deduce_rows(idx)
    y = np.asarray(records.y_star, dtype=np.int64)
    hit = ded[np.arange(n), y]
    ties = ded.sum(axis=1)
    de = np.where(hit, 1.0 / np.maximum(ties, 1), 0.0)
    return float(hit.mean()), float(de.mean())
