"""Finite unions of disjoint open intervals on the line."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np


class IntervalSet:
    """Sorted, pairwise disjoint open intervals ``(lo_i, hi_i)``.

    Overlapping inputs are merged.  Intervals that merely touch are kept
    apart, since the shared endpoint is not in an open union.
    """

    def __init__(self, intervals: Iterable[tuple] = ()):
        items = sorted((lo, hi) for lo, hi in intervals if hi > lo)
        merged: list[list] = []
        for lo, hi in items:
            if merged and lo < merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        self._exact = [(lo, hi) for lo, hi in merged]
        self.lo = np.array([float(lo) for lo, _ in merged], dtype=float)
        self.hi = np.array([float(hi) for _, hi in merged], dtype=float)

    def __len__(self) -> int:
        return len(self.lo)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(zip(self.lo.tolist(), self.hi.tolist()))

    def __repr__(self):
        body = ", ".join(f"({lo:.6g}, {hi:.6g})" for lo, hi in self)
        return f"IntervalSet([{body}])"

    def measure(self) -> float:
        if all(isinstance(x, Fraction) for pair in self._exact for x in pair):
            return float(sum((hi - lo for lo, hi in self._exact), Fraction(0)))
        return math.fsum((self.hi - self.lo).tolist())

    def component(self, y) -> np.ndarray:
        """Index of the interval containing each ``y``, or -1."""
        y = np.asarray(y, dtype=float)
        if len(self) == 0:
            return np.full(y.shape, -1)
        i = np.searchsorted(self.lo, y, side="left") - 1
        ic = np.clip(i, 0, len(self) - 1)
        inside = (i >= 0) & (y > self.lo[ic]) & (y < self.hi[ic])
        return np.where(inside, ic, -1)

    def contains(self, y) -> np.ndarray:
        return self.component(y) >= 0

    def measure_between(self, a: float, b: float) -> float:
        """Lebesgue measure of the set inside ``[a, b]`` (``a <= b``)."""
        lo = np.clip(self.lo, a, b)
        hi = np.clip(self.hi, a, b)
        return math.fsum((hi - lo).tolist())

    def to_list(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in self]

    @classmethod
    def from_list(cls, pairs) -> "IntervalSet":
        return cls((float(lo), float(hi)) for lo, hi in pairs)
