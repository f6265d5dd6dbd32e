"""Disjoint Koranyi-Cygan ball packings of the removed cells.

Each removed cell gets a ball at its center.  The cell is then split into
``2^dim`` coordinate halves, recursively up to ``pack_depth``, and every
sub-box gets the largest centered ball (times a safety factor) that stays in
the sub-box and clear of the balls already placed in the same cell.  Balls
in different cells are disjoint because they sit strictly inside disjoint
open cells; the pairwise check in ``verify_disjoint`` does not rely on that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import Algebra
from .carnot import CarnotPoint, chart_dim, from_chart, kc_dist
from .carpet import Box, CarpetSpec, CellTable, removed_cells
from .hyperbolic import Ball

SAFETY = 0.99
MC_CHUNK = 1 << 16


def _points(x, algebra: Algebra, n: int) -> CarnotPoint:
    xi, v = from_chart(x, algebra, n)
    return CarnotPoint(xi, v)


def chart_kc_dist(x, y, algebra, n: int) -> np.ndarray:
    a = Algebra.parse(algebra)
    return kc_dist(_points(x, a, n), _points(y, a, n))


def inradius(box: Box, algebra, n: int) -> float:
    """Lower bound on the gauge distance from the box center to its boundary.

    A point at gauge distance ``r`` from ``c`` differs from it by at most
    ``r`` in each horizontal coordinate and by at most ``r^2 + 2|xi_c| r``
    in each vertical one, so any ``r`` meeting both half-widths works.
    """
    a = Algebra.parse(algebra)
    hw = np.asarray(box.half_width, dtype=float)
    if np.any(hw <= 0):
        raise ValueError("degenerate box")
    m = (n - 1) * a.dim
    r = float(hw[:m].min())
    if a is not Algebra.R:
        xi_norm = float(np.linalg.norm(box.center[:m]))
        h = float(hw[m:].min())
        r = min(r, math.sqrt(xi_norm * xi_norm + h) - xi_norm)
    return r


def inradius_sampled(box: Box, algebra, n: int, samples: int = 10_000, seed: int = 0) -> float:
    """Smallest gauge distance from the center to sampled boundary points.

    Sampling can only overestimate the true inradius.
    """
    a = Algebra.parse(algebra)
    rng = np.random.default_rng(seed)
    dim = len(box.center)
    u = rng.uniform(-1.0, 1.0, size=(samples, dim))
    face = rng.integers(0, dim, size=samples)
    u[np.arange(samples), face] = rng.choice([-1.0, 1.0], size=samples)
    pts = box.center + u * box.half_width
    d = chart_kc_dist(np.broadcast_to(box.center, pts.shape), pts, a, n)
    return float(d.min())


@dataclass(frozen=True, eq=False)
class Packing:
    algebra: Algebra
    n: int
    centers: np.ndarray  # chart coordinates, (N, dim)
    radii: np.ndarray
    cell: np.ndarray  # owning row in the carpet's CellTable
    excluded: tuple = ()
    pack_depth: int = 0
    cell_addresses: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "algebra", Algebra.parse(self.algebra))

    def __len__(self) -> int:
        return len(self.radii)

    def ball(self, i: int) -> Ball:
        return Ball(_points(self.centers[i], self.algebra, self.n), float(self.radii[i]))

    def balls(self) -> list:
        return [self.ball(i) for i in range(len(self))]

    @property
    def active(self) -> list:
        """Indices of balls that carry an inversion generator."""
        ex = set(self.excluded)
        return [i for i in range(len(self)) if i not in ex]

    @property
    def generator_count(self) -> int:
        return len(self) - len(self.excluded)

    def center_point(self, idx=None) -> CarnotPoint:
        c = self.centers if idx is None else self.centers[idx]
        return _points(c, self.algebra, self.n)

    def slots(self, n_cells: int) -> np.ndarray:
        """``(n_cells, s)`` table of ball indices per cell, padded with -1."""
        counts = np.bincount(self.cell, minlength=n_cells)
        width = int(counts.max()) if len(counts) else 0
        table = np.full((n_cells, max(width, 1)), -1, dtype=np.int64)
        fill = np.zeros(n_cells, dtype=np.int64)
        for i, c in enumerate(self.cell.tolist()):
            table[c, fill[c]] = i
            fill[c] += 1
        return table

    def to_record(self) -> dict:
        ex = set(self.excluded)
        return {
            "format": "nilcarpet.packing",
            "version": 1,
            "algebra": self.algebra.name,
            "n": self.n,
            "pack_depth": self.pack_depth,
            "balls": [
                {
                    "cell": [list(d) for d in self.cell_addresses[i]] if self.cell_addresses else int(self.cell[i]),
                    "center": self.centers[i].tolist(),
                    "radius": float(self.radii[i]),
                    "excluded": i in ex,
                }
                for i in range(len(self))
            ],
        }


def inscribe_ball(box: Box, algebra, n: int) -> Ball:
    r = SAFETY * inradius(box, algebra, n)
    return Ball(_points(box.center, Algebra.parse(algebra), n), r)


def _halves(center: np.ndarray, hw: np.ndarray):
    dim = len(center)
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * dim), indexing="ij")).reshape(dim, -1).T
    for s in signs:
        yield center + s * hw / 2.0, hw / 2.0


def _pack_cell(box: Box, algebra: Algebra, n: int, depth: int):
    centers, radii = [], []

    def place(center, hw):
        limit = inradius(Box(center, hw), algebra, n)
        if centers:
            d = chart_kc_dist(np.broadcast_to(center, (len(centers), len(center))), np.array(centers), algebra, n)
            gaps = d - np.array(radii)
            limit = min(limit, float(gaps.min()))
        if limit > 0:
            centers.append(center)
            radii.append(SAFETY * limit)

    place(box.center, box.half_width)
    frontier = [(box.center, box.half_width)]
    for _ in range(depth):
        nxt = []
        for c, hw in frontier:
            for sc, shw in _halves(c, hw):
                place(sc, shw)
                nxt.append((sc, shw))
        frontier = nxt
    return centers, radii


def pack(carpet: CarpetSpec, algebra, n: int, pack_depth: int, cells: CellTable | None = None) -> Packing:
    a = Algebra.parse(algebra)
    if pack_depth < 0:
        raise ValueError("pack_depth must be >= 0")
    if carpet.dim != chart_dim(a, n):
        raise ValueError(f"carpet dim {carpet.dim} does not match {a.name}^{n - 1} (dim {chart_dim(a, n)})")
    cells = cells if cells is not None else removed_cells(carpet)
    centers, radii, owner = [], [], []
    for i in range(len(cells)):
        c, r = _pack_cell(cells.box(i), a, n, pack_depth)
        centers.extend(c)
        radii.extend(r)
        owner.extend([i] * len(c))
    addresses = tuple(cells.cell_id(i).address for i in owner)
    return Packing(a, n, np.array(centers, dtype=float).reshape(-1, carpet.dim), np.array(radii, dtype=float),
                   np.array(owner, dtype=np.int64), (), pack_depth, addresses)


def verify_disjoint(packing: Packing, block: int = 2048) -> tuple[bool, float]:
    """Pairwise ``rho_c(c_i, c_j) > r_i + r_j``; returns (ok, smallest margin)."""
    N = len(packing)
    worst = math.inf
    for s in range(0, N, block):
        ci = packing.centers[s:s + block]
        ri = packing.radii[s:s + block]
        for t in range(s, N, block):
            cj = packing.centers[t:t + block]
            rj = packing.radii[t:t + block]
            d = chart_kc_dist(ci[:, None, :], cj[None, :, :], packing.algebra, packing.n)
            margin = d - ri[:, None] - rj[None, :]
            if s == t:
                margin = margin[np.triu_indices(len(ci), k=1)]
            if margin.size:
                worst = min(worst, float(margin.min()))
    return (N < 2 or worst > 0), worst


def exclude(packing: Packing, indices) -> Packing:
    idx = sorted(set(int(i) for i in indices))
    for i in idx:
        if not 0 <= i < len(packing):
            raise IndexError(f"ball index {i} out of range for {len(packing)} balls")
    return replace(packing, excluded=tuple(sorted(set(packing.excluded) | set(idx))))


def sample_removed(cells: CellTable, samples: int, seed: int):
    """Uniform samples of the removed set, chunked with one substream per chunk."""
    vol = (2.0 * cells.half_width) ** cells.spec.dim
    p = vol / vol.sum()
    dim = cells.spec.dim
    n_chunks = -(-samples // MC_CHUNK)
    left = samples
    for ss in np.random.SeedSequence(seed).spawn(n_chunks):
        size = min(MC_CHUNK, left)
        left -= size
        rng = np.random.default_rng(ss)
        which = rng.choice(len(p), size=size, p=p)
        offs = rng.uniform(-1.0, 1.0, size=(size, dim))
        yield which, cells.center[which] + offs * cells.half_width[which][:, None]


def coverage_mc(packing: Packing, cells: CellTable, samples: int, seed: int) -> tuple[float, float]:
    """Fraction of the removed set covered by the balls, with its standard error."""
    if samples < 1000:
        raise ValueError("coverage_mc needs at least 1000 samples")
    if len(packing) == 0:
        return 0.0, 0.0
    table = packing.slots(len(cells))
    hits = 0
    for which, x in sample_removed(cells, samples, seed):
        inside = np.zeros(len(x), dtype=bool)
        for s in range(table.shape[1]):
            b = table[which, s]
            ok = b >= 0
            if not ok.any():
                continue
            d = chart_kc_dist(x[ok], packing.centers[b[ok]], packing.algebra, packing.n)
            inside[np.nonzero(ok)[0][d <= packing.radii[b[ok]]]] = True
        hits += int(inside.sum())
    f = hits / samples
    return f, math.sqrt(f * (1.0 - f) / samples)
