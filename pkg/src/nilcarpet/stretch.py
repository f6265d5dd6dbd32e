"""The stretch homeomorphism along the first horizontal axis.

``phi_t`` equals 1 on the gap set and ``t`` elsewhere; ``psi_t`` is its
signed integral from 0.  With ``G(x)`` the signed measure of the gap set
between 0 and ``x``,

    psi_t(x) = t x + (1 - t) G(x).

On a gap component ``(a, b)`` this is ``x + c`` with the constant
``c = (1 - t)(G(a) - a)``, which is how points over removed cells are moved:
by one shift, evaluated as a single float addition.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .carnot import CarnotPoint, HalfSpacePoint, Point, kc_dist, random_carnot
from .carpet import CarpetSpec, CellId, cell_interval, project_delta1
from .intervals import IntervalSet

HALF = Fraction(1, 2)


def _check_range(x: np.ndarray, what: str):
    if np.any(np.abs(x) > 0.5):
        raise ValueError(f"{what} must lie in [-1/2, 1/2]")


class StretchMap:
    """``f_t``: replaces the first real coordinate ``x1`` by ``psi_t(x1)``."""

    def __init__(self, t: float, delta1: IntervalSet, carpet: CarpetSpec | None = None):
        t = float(t)
        if not (t > 0 and math.isfinite(t)):
            raise ValueError(f"stretch parameter t must be positive, got {t}")
        if len(delta1) and (delta1.lo[0] < -0.5 or delta1.hi[-1] > 0.5):
            raise ValueError("gap set must lie inside [-1/2, 1/2]")
        self.t = t
        self.delta1 = delta1
        self.carpet = carpet

        exact = [(Fraction(lo), Fraction(hi)) for lo, hi in delta1._exact]
        # F(y) = measure of the gap set inside [-1/2, y], exact at breakpoints.
        before = []
        acc = Fraction(0)
        for lo, hi in exact:
            before.append(acc)
            acc += hi - lo
        self.gap_measure_exact = acc
        f0 = self._cumulative(exact, before, Fraction(0))
        g_lo = [b - f0 for b in before]  # G at each left endpoint
        self._g_lo = np.array([float(g) for g in g_lo])
        self._g_hi = np.array([float(g + hi - lo) for g, (lo, hi) in zip(g_lo, exact)])
        self._g_start = float(-f0)  # G on [-1/2, first gap]
        self.shift = np.array([(1.0 - t) * float(g - lo) for g, (lo, _) in zip(g_lo, exact)])
        self._img_lo = delta1.lo + self.shift
        self._img_hi = delta1.hi + self.shift
        self.lo_end = self._psi_outside(-0.5, self._g_start)
        self.hi_end = self._psi_outside(0.5, float(self._g_hi[-1]) if len(delta1) else 0.0)

    @classmethod
    def from_carpet(cls, carpet: CarpetSpec, t: float) -> "StretchMap":
        return cls(t, project_delta1(carpet), carpet)

    @staticmethod
    def _cumulative(exact, before, y: Fraction) -> Fraction:
        for (lo, hi), b in zip(exact, before):
            if y <= lo:
                return b
            if y < hi:
                return b + (y - lo)
        return before[-1] + exact[-1][1] - exact[-1][0] if exact else Fraction(0)

    def _psi_outside(self, x, g):
        return self.t * x + (1.0 - self.t) * g

    def _g_complement(self, i: np.ndarray) -> np.ndarray:
        """Constant value of G on the complement piece after gap ``i`` (``i = -1``: before all)."""
        if len(self.delta1) == 0:
            return np.zeros(np.shape(i))
        return np.where(i < 0, self._g_start, self._g_hi[np.clip(i, 0, None)])

    @property
    def gap_measure(self) -> float:
        return float(self.gap_measure_exact)

    def phi(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        _check_range(y, "phi argument")
        return np.where(self.delta1.contains(y), 1.0, self.t)

    def psi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_range(x, "psi argument")
        if self.t == 1.0:
            return x.copy()
        comp = self.delta1.component(x)
        if len(self.delta1) == 0:
            return self.t * x
        in_gap = comp >= 0
        # index of the last gap starting at or before x, for complement pieces
        last = np.searchsorted(self.delta1.lo, x, side="right") - 1
        outside = self._psi_outside(x, self._g_complement(last))
        inside = x + self.shift[np.clip(comp, 0, None)]
        return np.where(in_gap, inside, outside)

    def psi_inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any((y < self.lo_end) | (y > self.hi_end)):
            raise ValueError("psi_inverse argument outside the image of [-1/2, 1/2]")
        if self.t == 1.0:
            return y.copy()
        if len(self.delta1) == 0:
            return y / self.t
        i = np.searchsorted(self._img_lo, y, side="right") - 1
        ic = np.clip(i, 0, None)
        in_gap = (i >= 0) & (y < self._img_hi[ic])
        inside = y - self.shift[ic]
        outside = (y - (1.0 - self.t) * self._g_complement(i)) / self.t
        return np.clip(np.where(in_gap, inside, outside), -0.5, 0.5)

    def psi_periodic(self, x) -> np.ndarray:
        """Extension of ``psi_t`` to the line commuting with unit / ``t1`` steps."""
        x = np.asarray(x, dtype=float)
        m = np.floor(x + 0.5)
        r = np.clip(x - m, -0.5, 0.5)
        return self.psi(r) + m * self.t1()

    def t1(self) -> float:
        m = self.gap_measure
        return m + self.t * (1.0 - m)

    def slope(self, x, h: float = 1e-6) -> np.ndarray:
        """Forward difference quotient of ``psi_t`` (backward near the right end)."""
        x = np.asarray(x, dtype=float)
        a = np.where(x + h <= 0.5, x, x - h)
        return (self.psi(a + h) - self.psi(a)) / h

    def apply(self, p: Point) -> Point:
        xi = p.xi
        _check_range(xi[..., 0, 0], "first horizontal coordinate (reduce into the column first)")
        new = np.array(xi)
        new[..., 0, 0] = self.psi(xi[..., 0, 0])
        if isinstance(p, HalfSpacePoint):
            return HalfSpacePoint(new, p.v, p.u)
        return CarnotPoint(new, p.v)

    def cell_translation(self, cell) -> float:
        """Shift ``c`` with ``psi_t(x) = x + c`` over the first-axis projection of ``cell``.

        ``cell`` is a ``CellId`` (requires the carpet) or an explicit
        ``(lo, hi)`` projection interval.
        """
        if isinstance(cell, CellId):
            if self.carpet is None:
                raise ValueError("cell addresses need a stretch map built from a carpet")
            lo, hi = cell_interval(self.carpet, cell)
        else:
            lo, hi = cell
        mid = (float(lo) + float(hi)) / 2.0
        comp = int(self.delta1.component(mid))
        if comp < 0 or not (self.delta1.lo[comp] <= float(lo) and float(hi) <= self.delta1.hi[comp]):
            raise ValueError(f"cell projection ({float(lo)}, {float(hi)}) is not inside one gap component")
        return float(self.shift[comp])

    def component_of(self, cell) -> int:
        lo, hi = cell_interval(self.carpet, cell) if isinstance(cell, CellId) else cell
        return int(self.delta1.component((float(lo) + float(hi)) / 2.0))

    def to_record(self) -> dict:
        return {
            "format": "nilcarpet.stretch",
            "version": 1,
            "t": self.t,
            "t1": self.t1(),
            "delta1": self.delta1.to_list(),
        }


def distortion_ratios(fmap: StretchMap, algebra, n: int, samples: int, seed: int) -> dict:
    """Empirical range of ``rho_c(f p, f q) / rho_c(p, q)`` over boundary pairs in the column."""
    rng = np.random.default_rng(seed)
    p = random_carnot(algebra, n, samples, rng, scale=0.25)
    q = random_carnot(algebra, n, samples, rng, scale=0.25)
    clip = lambda c: CarnotPoint(np.clip(c.xi, -0.5, 0.5), c.v)
    p, q = clip(p), clip(q)
    d0 = kc_dist(p, q)
    d1 = kc_dist(fmap.apply(p), fmap.apply(q))
    keep = d0 > 1e-9
    ratio = d1[keep] / d0[keep]
    bound = max(1.0, fmap.t) / min(1.0, fmap.t)
    return {
        "samples": int(keep.sum()),
        "min_ratio": float(ratio.min()),
        "max_ratio": float(ratio.max()),
        "dilatation_bound": bound,
    }
