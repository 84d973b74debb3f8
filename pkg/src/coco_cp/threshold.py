"""Enumerate concept tuples whose aggregated per-concept cost passes a threshold.

The aggregate of a tuple is ``combine(A, B)`` where ``A`` folds the costs of
the first ``k // 2`` concepts left to right and ``B`` folds the rest. Every
caller (enumeration, counting, membership) uses this same grouping, so the
three agree bit for bit.

Rounded addition and multiplication by a nonnegative number are monotone,
so for a fixed ``A`` the accepted ``B`` values form a prefix of the sorted
``B`` table. Enumeration therefore only touches accepted tuples plus one
binary search per ``A`` entry; ``A`` entries that fail even with the
smallest ``B`` are dropped outright.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import CapExceeded

Accept = Callable[[np.ndarray], np.ndarray]

_IDENTITY = {"sum": 0.0, "prod": 1.0}


def _fold_n(costs, combine, n):
    """All combinations of a block of concepts in C order, shape ``(n, prod V)``."""
    out = np.full((n, 1), _IDENTITY[combine])
    for c in costs:
        if combine == "sum":
            out = (out[:, :, None] + c[:, None, :]).reshape(n, -1)
        else:
            out = (out[:, :, None] * c[:, None, :]).reshape(n, -1)
    return out


def _split(costs):
    h = len(costs) // 2
    return costs[:h], costs[h:]


def _combine(a, b, combine):
    return a + b if combine == "sum" else a * b


def aggregate_tuple(costs: Sequence[np.ndarray], rows: np.ndarray, values: np.ndarray, combine: str) -> np.ndarray:
    """Canonical aggregate of one tuple per row: ``values[i]`` picks from ``costs[j][rows[i]]``."""
    n = len(rows)
    parts = []
    for block in _split(list(range(len(costs)))):
        acc = np.full(n, _IDENTITY[combine])
        for j in block:
            acc = _combine(acc, costs[j][rows, values[:, j]], combine)
        parts.append(acc)
    return _combine(parts[0], parts[1], combine)


def _prefix_counts(a: np.ndarray, b_sorted: np.ndarray, accept: Accept, combine: str) -> np.ndarray:
    """For each ``a[i, r]`` the number of leading ``b_sorted[i]`` entries accepted."""
    n, na = a.shape
    nb = b_sorted.shape[1]
    lo = np.zeros((n, na), dtype=np.int64)
    hi = np.full((n, na), nb, dtype=np.int64)
    rows = np.arange(n)[:, None]
    while True:
        active = lo < hi
        if not active.any():
            return lo
        mid = (lo + hi) // 2
        val = _combine(a, b_sorted[rows, np.minimum(mid, nb - 1)], combine)
        ok = accept(val)
        lo = np.where(active & ok, mid + 1, lo)
        hi = np.where(active & ~ok, mid, hi)


def count_accepted(costs: Sequence[np.ndarray], accept: Accept, combine: str = "sum",
                   chunk_elems: int = 2_000_000) -> np.ndarray:
    """Number of accepted tuples per row; ``costs[j]`` has shape ``(N, V_j)``."""
    costs = [np.asarray(c, dtype=np.float64) for c in costs]
    first, second = _split(costs)
    n = costs[0].shape[0]
    width = max(1, math.prod(c.shape[1] for c in first) + math.prod(c.shape[1] for c in second))
    step = max(1, chunk_elems // width)
    out = np.empty(n, dtype=np.int64)
    for s in range(0, n, step):
        a = _fold_n([c[s:s + step] for c in first], combine, min(step, n - s))
        b = np.sort(_fold_n([c[s:s + step] for c in second], combine, min(step, n - s)), axis=1)
        out[s:s + step] = _prefix_counts(a, b, accept, combine).sum(axis=1)
    return out


def enumerate_accepted(costs: Sequence[np.ndarray], accept: Accept, combine: str = "sum",
                       cap: int = 10**6, what: str = "thresholded concept set") -> np.ndarray:
    """Sorted flat indices of accepted tuples for a single record.

    ``costs[j]`` has shape ``(V_j,)``. Raises CapExceeded when the accepted
    set is larger than ``cap``; the count is known before anything is
    materialised.
    """
    costs = [np.asarray(c, dtype=np.float64)[None, :] for c in costs]
    first, second = _split(costs)
    a = _fold_n(first, combine, 1)[0]
    b = _fold_n(second, combine, 1)[0]
    order = np.argsort(b, kind="stable")
    b_sorted = b[order]
    counts = _prefix_counts(a[None, :], b_sorted[None, :], accept, combine)[0]
    total = int(counts.sum())
    if total > cap:
        raise CapExceeded(what, total, cap)
    live = np.flatnonzero(counts)
    if live.size == 0:
        return np.zeros(0, dtype=np.int64)
    nb = b.size
    reps = counts[live]
    a_idx = np.repeat(live, reps)
    offsets = np.arange(total) - np.repeat(np.cumsum(reps) - reps, reps)
    flat = a_idx * nb + order[offsets]
    return np.sort(flat)


def brute_force_accepted(costs: Sequence[np.ndarray], accept: Accept, combine: str = "sum") -> np.ndarray:
    """Reference enumeration over the full product, same aggregation grouping."""
    costs = [np.asarray(c, dtype=np.float64)[None, :] for c in costs]
    first, second = _split(costs)
    a = _fold_n(first, combine, 1)[0]
    b = _fold_n(second, combine, 1)[0]
    total = _combine(a[:, None], b[None, :], combine).ravel()
    return np.flatnonzero(accept(total)).astype(np.int64)
