"""Per-example probability summaries, row-wise and columnar."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np


@dataclass
class FactorizedConceptDistribution:
    """Per-concept categorical distributions p(C_j | x)."""

    per_concept: tuple[np.ndarray, ...]

    def __post_init__(self):
        self.per_concept = tuple(np.asarray(p, dtype=np.float64) for p in self.per_concept)

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.per_concept)

    def validate(self, tol: float = 1e-6) -> None:
        for j, p in enumerate(self.per_concept):
            if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > tol:
                raise ValueError(f"concept {j} is not a probability vector: {p}")

    def argmax(self) -> tuple[int, ...]:
        return tuple(int(np.argmax(p)) for p in self.per_concept)


@dataclass
class ExampleRecord:
    id: str
    concept_probs: FactorizedConceptDistribution
    y_star: int
    label_probs: Optional[np.ndarray] = None
    c_star: Optional[tuple[int, ...]] = None


@dataclass
class RecordBatch:
    """Columnar view of a list of records.

    ``concept_probs[j]`` has shape ``(n, V_j)``; ``c_star`` is ``(n, k)`` or
    None when no concept annotations exist.
    """

    ids: list[str]
    concept_probs: list[np.ndarray]
    label_probs: np.ndarray
    y_star: np.ndarray
    c_star: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def k(self) -> int:
        return len(self.concept_probs)

    def take(self, rows: Sequence[int] | np.ndarray) -> "RecordBatch":
        rows = np.asarray(rows, dtype=np.int64)
        return RecordBatch(
            ids=[self.ids[i] for i in rows],
            concept_probs=[p[rows] for p in self.concept_probs],
            label_probs=self.label_probs[rows],
            y_star=self.y_star[rows],
            c_star=None if self.c_star is None else self.c_star[rows],
        )

    def concept_distribution(self, i: int) -> FactorizedConceptDistribution:
        return FactorizedConceptDistribution(tuple(p[i] for p in self.concept_probs))

    def records(self) -> Iterator[ExampleRecord]:
        for i, rid in enumerate(self.ids):
            yield ExampleRecord(
                id=rid,
                concept_probs=self.concept_distribution(i),
                y_star=int(self.y_star[i]),
                label_probs=self.label_probs[i],
                c_star=None if self.c_star is None else tuple(int(x) for x in self.c_star[i]),
            )

    @classmethod
    def concat(cls, batches: Sequence["RecordBatch"]) -> "RecordBatch":
        has_c = all(b.c_star is not None for b in batches)
        return cls(
            ids=[i for b in batches for i in b.ids],
            concept_probs=[np.concatenate([b.concept_probs[j] for b in batches]) for j in range(batches[0].k)],
            label_probs=np.concatenate([b.label_probs for b in batches]),
            y_star=np.concatenate([b.y_star for b in batches]),
            c_star=np.concatenate([b.c_star for b in batches]) if has_c else None,
        )
