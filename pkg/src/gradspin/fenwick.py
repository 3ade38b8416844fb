"""Fenwick (binary indexed) tree over non-negative rates.

The jitted functions work on a 1-based ``tree`` array of length ``size + 1``;
:class:`RateIndex` wraps them for use from Python and in tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def fen_build(values, tree):
    n = values.shape[0]
    tree[0] = 0.0
    for i in range(n):
        tree[i + 1] = values[i]
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@njit(cache=True, nogil=True)
def fen_add(tree, i, delta):
    n = tree.shape[0] - 1
    j = i + 1
    while j <= n:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True, nogil=True)
def fen_prefix(tree, i):
    """Sum of the first ``i`` entries."""
    s = 0.0
    j = i
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(cache=True, nogil=True)
def fen_find(tree, target):
    """Smallest 0-based index whose inclusive prefix sum exceeds ``target``."""
    n = tree.shape[0] - 1
    step = 1
    while step * 2 <= n:
        step *= 2
    pos = 0
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step //= 2
    return pos


class RateIndex:
    """Cumulative rate table with O(log n) update and proportional selection."""

    def __init__(self, rates):
        values = np.asarray(rates, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("rates must be a non-empty 1-D array")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("rates must be finite and non-negative")
        self.values = values.copy()
        self.tree = np.zeros(values.size + 1)
        fen_build(self.values, self.tree)

    def __len__(self) -> int:
        return self.values.size

    @property
    def total(self) -> float:
        return fen_prefix(self.tree, self.values.size)

    def prefix(self, i: int) -> float:
        if not 0 <= i <= self.values.size:
            raise IndexError(i)
        return fen_prefix(self.tree, i)

    def set(self, i: int, rate: float) -> None:
        if rate < 0:
            raise ValueError("rates must be non-negative")
        fen_add(self.tree, i, rate - self.values[i])
        self.values[i] = rate

    def find(self, target: float) -> int:
        """Entry selected by a uniform draw ``target`` in [0, total)."""
        if not 0 <= target < self.total:
            raise ValueError("target must lie in [0, total)")
        idx = fen_find(self.tree, target)
        # rounding can land just past the last positive entry
        while idx >= self.values.size or self.values[idx] == 0.0:
            idx -= 1
        return int(idx)

    def rebuild(self) -> None:
        fen_build(self.values, self.tree)
