"""Concept spaces and concept-vector sets.

Concept vectors are addressed by a mixed-radix flat index in C order (the
last concept varies fastest), so ``(7, 5)`` over ``(10, 10)`` is index 75.
Two set flavours exist: :class:`ProductSet` keeps per-concept factors and
never enumerates unless asked, :class:`ConceptSet` holds a sorted array of
flat indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import CapExceeded, DimensionMismatch

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class ConceptSpace:
    domain_sizes: tuple[int, ...]
    total_size: int = field(init=False)

    def __post_init__(self):
        sizes = tuple(int(v) for v in self.domain_sizes)
        if not sizes:
            raise DimensionMismatch("a concept space needs at least one concept")
        if any(v < 1 for v in sizes):
            raise DimensionMismatch(f"domain sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "domain_sizes", sizes)
        object.__setattr__(self, "total_size", math.prod(sizes))

    @property
    def k(self) -> int:
        return len(self.domain_sizes)

    def check_cap(self, cap: int, what: str = "concept space") -> None:
        if self.total_size > cap:
            raise CapExceeded(what, self.total_size, cap)

    def validate(self, c: Sequence[int]) -> tuple[int, ...]:
        c = tuple(int(x) for x in c)
        if len(c) != self.k:
            raise DimensionMismatch(f"concept vector {c} has length {len(c)}, expected {self.k}")
        for j, (x, v) in enumerate(zip(c, self.domain_sizes)):
            if not 0 <= x < v:
                raise DimensionMismatch(f"component {j} of {c} outside [0, {v})")
        return c

    def index(self, c: Sequence[int]) -> int:
        return int(np.ravel_multi_index(self.validate(c), self.domain_sizes))

    def indices(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.int64).reshape(-1, self.k)
        return np.ravel_multi_index(tuple(vectors.T), self.domain_sizes).astype(np.int64)

    def vector(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(int(index), self.domain_sizes))

    def vectors(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return np.zeros((0, self.k), dtype=np.int64)
        return np.stack(np.unravel_index(indices, self.domain_sizes), axis=1).astype(np.int64)

    def all_vectors(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        self.check_cap(cap)
        return self.vectors(np.arange(self.total_size))


@dataclass(frozen=True)
class LabelSpace:
    num_labels: int

    def __post_init__(self):
        if int(self.num_labels) < 1:
            raise DimensionMismatch("label space needs at least one label")


class ConceptSet:
    """Explicit set of concept vectors stored as sorted flat indices."""

    __slots__ = ("space", "idx")

    def __init__(self, space: ConceptSpace, idx):
        self.space = space
        self.idx = np.unique(np.asarray(idx, dtype=np.int64))

    @classmethod
    def from_vectors(cls, space: ConceptSpace, vectors: Iterable[Sequence[int]]) -> "ConceptSet":
        vecs = [space.validate(c) for c in vectors]
        if not vecs:
            return cls(space, np.zeros(0, dtype=np.int64))
        return cls(space, space.indices(np.array(vecs)))

    @classmethod
    def empty(cls, space: ConceptSpace) -> "ConceptSet":
        return cls(space, np.zeros(0, dtype=np.int64))

    @property
    def size(self) -> int:
        return int(self.idx.size)

    def __len__(self) -> int:
        return self.size

    def indices(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        return self.idx

    def contains_index(self, i: int) -> bool:
        pos = np.searchsorted(self.idx, i)
        return bool(pos < self.idx.size and self.idx[pos] == i)

    def __contains__(self, c) -> bool:
        return self.contains_index(self.space.index(c))

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        for i in self.idx:
            yield self.space.vector(i)

    def to_tuples(self) -> set[tuple[int, ...]]:
        return set(self)

    def __eq__(self, other) -> bool:
        if isinstance(other, (ConceptSet, ProductSet)):
            return self.space == other.space and np.array_equal(self.idx, other.indices())
        if isinstance(other, (set, frozenset)):
            return self.to_tuples() == {tuple(c) for c in other}
        return NotImplemented

    def __repr__(self) -> str:
        shown = [self.space.vector(i) for i in self.idx[:6]]
        more = ", ..." if self.size > 6 else ""
        return f"ConceptSet(size={self.size}, {shown}{more})"


class ProductSet:
    """Cartesian product of per-concept value sets, enumerated on demand."""

    __slots__ = ("space", "factors")

    def __init__(self, space: ConceptSpace, factors: Sequence[Iterable[int]]):
        if len(factors) != space.k:
            raise DimensionMismatch(f"{len(factors)} factors for a space with k={space.k}")
        fs = []
        for j, f in enumerate(factors):
            vals = tuple(sorted({int(v) for v in f}))
            if vals and not (0 <= vals[0] and vals[-1] < space.domain_sizes[j]):
                raise DimensionMismatch(f"factor {j} has values outside [0, {space.domain_sizes[j]})")
            fs.append(vals)
        self.space = space
        self.factors = tuple(fs)

    @property
    def size(self) -> int:
        return math.prod(len(f) for f in self.factors)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, c) -> bool:
        c = self.space.validate(c)
        return all(x in f for x, f in zip(c, self.factors))

    def contains_index(self, i: int) -> bool:
        return self.space.vector(i) in self

    def indices(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        n = self.size
        if n > cap:
            raise CapExceeded("product concept set", n, cap)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        grids = np.meshgrid(*[np.asarray(f, dtype=np.int64) for f in self.factors], indexing="ij")
        return np.ravel_multi_index(tuple(g.ravel() for g in grids), self.space.domain_sizes).astype(np.int64)

    def to_explicit(self, cap: int = DEFAULT_CAP) -> ConceptSet:
        return ConceptSet(self.space, self.indices(cap))

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*self.factors)

    def to_tuples(self) -> set[tuple[int, ...]]:
        return set(self)

    def __eq__(self, other) -> bool:
        if isinstance(other, ProductSet):
            return self.space == other.space and (
                self.factors == other.factors or (self.size == 0 and other.size == 0)
            )
        if isinstance(other, ConceptSet):
            return other == self
        if isinstance(other, (set, frozenset)):
            return self.to_tuples() == {tuple(c) for c in other}
        return NotImplemented

    def __repr__(self) -> str:
        return f"ProductSet(size={self.size}, factors={self.factors})"


AnyConceptSet = Union[ConceptSet, ProductSet]


def as_concept_set(space: ConceptSpace, obj, cap: int = DEFAULT_CAP) -> AnyConceptSet:
    """Coerce a ConceptSet, ProductSet or iterable of vectors."""
    if isinstance(obj, (ConceptSet, ProductSet)):
        if obj.space != space:
            raise DimensionMismatch("concept set belongs to a different concept space")
        return obj
    return ConceptSet.from_vectors(space, obj)


def concept_indices(space: ConceptSpace, obj, cap: int = DEFAULT_CAP) -> np.ndarray:
    return as_concept_set(space, obj, cap).indices(cap)
