"""Depth-truncated fat Sierpinski carpets in the coordinate cube.

The cube ``Q = [-1/2, 1/2]^dim`` lives in exponential coordinates of the
Carnot group (or of R^{n-1}).  Level ``j`` splits every surviving cell into
``k_j^dim`` equal coordinate sub-boxes and casts out the interior of the
central one, so ``m(K_D) = prod_j (1 - k_j^-dim)``.

Cell geometry is kept on integer grids (level ``l`` has spacing
``1 / (k_1 ... k_l)``), so every endpoint below is exact until it is
converted to float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .intervals import IntervalSet

DEFAULT_CAP = 2_000_000
MC_CHUNK = 1 << 16


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class CarpetSpec:
    dim: int
    k_seq: tuple
    depth: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        k_seq = tuple(int(k) for k in self.k_seq)
        object.__setattr__(self, "k_seq", k_seq)
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if len(k_seq) < self.depth:
            raise ValueError(f"k_seq has {len(k_seq)} entries but depth is {self.depth}")
        for k in k_seq:
            if k < 3 or k % 2 == 0:
                raise ValueError(f"k_seq entries must be odd integers >= 3, got {k}")
        if len(k_seq) > 1:
            steps = [b - a for a, b in zip(k_seq, k_seq[1:])]
            if not (all(s > 0 for s in steps) or all(s == 0 for s in steps)):
                raise ValueError(f"k_seq must be strictly increasing or constant, got {list(k_seq)}")

    @classmethod
    def geometric(cls, dim: int, base: int, depth: int, **kw) -> "CarpetSpec":
        """``k_j = base^j`` for ``j = 1..depth``."""
        return cls(dim, tuple(base ** j for j in range(1, depth + 1)), depth, **kw)

    @classmethod
    def constant(cls, dim: int, k: int, depth: int, **kw) -> "CarpetSpec":
        return cls(dim, (k,) * depth, depth, **kw)

    @property
    def levels(self) -> tuple:
        return self.k_seq[: self.depth]

    def grid(self, level: int) -> int:
        """Number of grid steps per axis at ``level`` (0 means the whole cube)."""
        return math.prod(self.levels[:level])

    def removed_count(self) -> int:
        total, survivors = 0, 1
        for k in self.levels:
            total += survivors
            survivors *= k ** self.dim - 1
        return total


@dataclass(frozen=True)
class CellId:
    """Per-level multi-indices of a removed cell; the last one is central."""

    address: tuple

    @property
    def level(self) -> int:
        return len(self.address)


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    half_width: np.ndarray

    def contains(self, x, strict: bool = True) -> np.ndarray:
        d = np.abs(np.asarray(x, dtype=float) - self.center)
        return np.all(d < self.half_width, axis=-1) if strict else np.all(d <= self.half_width, axis=-1)


class CellTable:
    """All removed cells up to the truncation depth, in generation order."""

    def __init__(self, spec: CarpetSpec, level: np.ndarray, corner: np.ndarray):
        self.spec = spec
        self.level = level
        self.corner = corner
        self.grid = np.array([spec.grid(int(l)) for l in level], dtype=np.int64)
        inv = 1.0 / self.grid.astype(float)
        self.center = (corner + 0.5) * inv[:, None] - 0.5
        self.half_width = 0.5 * inv

    def __len__(self) -> int:
        return len(self.level)

    def box(self, i: int) -> Box:
        hw = np.full(self.spec.dim, self.half_width[i])
        return Box(self.center[i].copy(), hw)

    def cell_id(self, i: int) -> CellId:
        lvl = int(self.level[i])
        ks = self.spec.levels[:lvl]
        digits = []
        rem = self.corner[i].copy()
        for k in reversed(ks):
            digits.append(tuple(int(d) for d in rem % k))
            rem //= k
        return CellId(tuple(reversed(digits)))

    def __iter__(self) -> Iterator[tuple[CellId, Box]]:
        for i in range(len(self)):
            yield self.cell_id(i), self.box(i)

    def __getitem__(self, i: int) -> tuple[CellId, Box]:
        return self.cell_id(i), self.box(i)

    def interval(self, i: int) -> tuple[Fraction, Fraction]:
        """Exact first-axis projection of cell ``i``."""
        g = int(self.grid[i])
        c = int(self.corner[i, 0])
        return Fraction(c, g) - Fraction(1, 2), Fraction(c + 1, g) - Fraction(1, 2)

    def locate(self, x) -> np.ndarray:
        """Index of the removed cell whose open box contains ``x``, or -1."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), -1, dtype=np.int64)
        for lvl in range(1, self.spec.depth + 1):
            g = self.spec.grid(lvl)
            sel = np.nonzero(self.level == lvl)[0]
            if len(sel) == 0:
                continue
            lookup = {tuple(c): int(i) for c, i in zip(self.corner[sel].tolist(), sel)}
            y = (x + 0.5) * g
            idx = np.floor(y).astype(np.int64)
            interior = np.all(y > idx, axis=-1)
            for j in np.nonzero((out < 0) & interior)[0]:
                hit = lookup.get(tuple(idx[j].tolist()))
                if hit is not None:
                    out[j] = hit
        return out


def removed_cells(spec: CarpetSpec) -> CellTable:
    if spec.depth < 1:
        raise ValueError("removed_cells needs depth >= 1")
    count = spec.removed_count()
    if count > spec.cap:
        raise EnumerationCapExceeded(f"{count} removed cells exceed the enumeration cap {spec.cap}")
    dim = spec.dim
    survivors = np.zeros((1, dim), dtype=np.int64)
    levels, corners = [], []
    for lvl, k in enumerate(spec.levels, start=1):
        mid = (k - 1) // 2
        corners.append(survivors * k + mid)
        levels.append(np.full(len(survivors), lvl, dtype=np.int64))
        if lvl == spec.depth:
            break
        offsets = np.stack(np.meshgrid(*([np.arange(k)] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        offsets = offsets[~np.all(offsets == mid, axis=1)]
        survivors = (survivors[:, None, :] * k + offsets[None, :, :]).reshape(-1, dim)
    return CellTable(spec, np.concatenate(levels), np.concatenate(corners))


def _check_in_cube(x: np.ndarray):
    if np.any(np.abs(x) > 0.5):
        raise ValueError("point outside the cube Q = [-1/2, 1/2]^dim")


def contains(spec: CarpetSpec, x) -> np.ndarray:
    """Membership in ``K_D`` by per-level index arithmetic (no enumeration)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise ValueError(f"expected {spec.dim} coordinates, got {x.shape[-1]}")
    _check_in_cube(x)
    y = x + 0.5
    alive = np.ones(x.shape[:-1], dtype=bool)
    for k in spec.levels:
        mid = (k - 1) // 2
        s = y * k
        idx = np.clip(np.floor(s), 0, k - 1)
        frac = s - idx
        central = np.all((idx == mid) & (frac > 0) & (frac < 1), axis=-1)
        alive &= ~central
        y = frac
    return alive


def measure_exact(spec: CarpetSpec) -> float:
    return math.prod(1.0 - float(k) ** (-spec.dim) for k in spec.levels)


def delta1_measure_exact(spec: CarpetSpec) -> float:
    """Closed form ``1 - prod (1 - 1/k_j)`` for the projected gap set."""
    return 1.0 - math.prod(1.0 - 1.0 / k for k in spec.levels)


def sample_cube(spec: CarpetSpec, samples: int, seed: int) -> Iterator[np.ndarray]:
    """Uniform points of Q in fixed-size chunks, one seeded substream per chunk."""
    n_chunks = -(-samples // MC_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    left = samples
    for ss in streams:
        size = min(MC_CHUNK, left)
        left -= size
        yield np.random.default_rng(ss).random((size, spec.dim)) - 0.5


def measure_mc(spec: CarpetSpec, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of ``m(K_D)`` and its standard error."""
    if samples < 1000:
        raise ValueError("measure_mc needs at least 1000 samples")
    hits = 0
    for chunk in sample_cube(spec, samples, seed):
        hits += int(np.count_nonzero(contains(spec, chunk)))
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)


def _level_columns(spec: CarpetSpec, level: int) -> np.ndarray:
    """First-axis indices (on the level-``level-1`` grid) of cells that survive to ``level``."""
    if spec.dim >= 2:
        # a cell is removed only when every coordinate is central, so all columns survive
        return np.arange(spec.grid(level - 1), dtype=np.int64)
    cols = np.zeros(1, dtype=np.int64)
    for k in spec.levels[: level - 1]:
        mid = (k - 1) // 2
        digits = np.array([d for d in range(k) if d != mid], dtype=np.int64)
        cols = (cols[:, None] * k + digits[None, :]).reshape(-1)
    return cols


def project_delta1(spec: CarpetSpec, cells: CellTable | None = None) -> IntervalSet:
    """Union of the first-axis projections of all removed cells.

    With ``cells`` the projections are read off the enumerated cells;
    otherwise they are generated level by level on the finest grid, which
    needs no cell enumeration.
    """
    if cells is not None:
        pieces = set()
        for lvl in range(1, spec.depth + 1):
            g = spec.grid(lvl)
            for c in np.unique(cells.corner[cells.level == lvl, 0]).tolist():
                pieces.add((Fraction(c, g) - Fraction(1, 2), Fraction(c + 1, g) - Fraction(1, 2)))
        return IntervalSet(pieces)
    total = sum(len(_level_columns(spec, lvl)) for lvl in range(1, spec.depth + 1)) if spec.dim == 1 else \
        sum(spec.grid(lvl - 1) for lvl in range(1, spec.depth + 1))
    if total > spec.cap:
        raise EnumerationCapExceeded(f"{total} projected intervals exceed the enumeration cap {spec.cap}")
    fine = spec.grid(spec.depth)
    if fine >= 1 << 62:
        raise EnumerationCapExceeded("finest grid does not fit 64-bit integers")
    los, his = [], []
    for lvl, k in enumerate(spec.levels, start=1):
        unit = fine // spec.grid(lvl)
        lo = (_level_columns(spec, lvl) * k + (k - 1) // 2) * unit
        los.append(lo)
        his.append(lo + unit)
    lo = np.concatenate(los)
    hi = np.concatenate(his)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    start = np.ones(len(lo), dtype=bool)
    start[1:] = lo[1:] >= reach[:-1]
    first = np.nonzero(start)[0]
    last = np.append(first[1:], len(lo)) - 1
    half = Fraction(1, 2)
    return IntervalSet((Fraction(int(a), fine) - half, Fraction(int(b), fine) - half)
                       for a, b in zip(lo[first].tolist(), reach[last].tolist()))


def box_count_dimension(spec: CarpetSpec, resolution: int, box_sizes) -> tuple[float, list]:
    """Box-counting dimension of ``K_D`` from a pixel raster (dim 2 only).

    ``box_sizes`` are box side lengths in pixels; each must divide
    ``resolution``.  Returns the least-squares slope of ``log N`` against
    ``log(1/eps)`` and the raw counts.
    """
    if spec.dim != 2:
        raise ValueError("box counting is implemented for planar carpets")
    t = (np.arange(resolution) + 0.5) / resolution - 0.5
    xx, yy = np.meshgrid(t, t, indexing="ij")
    img = contains(spec, np.stack([xx, yy], axis=-1))
    counts = []
    for b in box_sizes:
        if resolution % b:
            raise ValueError(f"box size {b} does not divide resolution {resolution}")
        m = resolution // b
        occupied = img.reshape(m, b, m, b).any(axis=(1, 3))
        counts.append(int(occupied.sum()))
    log_inv_eps = np.log(resolution / np.asarray(box_sizes, dtype=float))
    slope = np.polyfit(log_inv_eps, np.log(counts), 1)[0]
    return float(slope), counts


def carpet_record(spec: CarpetSpec, cells: CellTable | None = None) -> dict:
    """Versioned, JSON-ready description of the truncated carpet."""
    cells = cells if cells is not None else removed_cells(spec)
    return {
        "format": "nilcarpet.carpet",
        "version": 1,
        "dim": spec.dim,
        "k_seq": list(spec.levels),
        "depth": spec.depth,
        "removed_cell_count": len(cells),
        "measure_exact": measure_exact(spec),
        "cells": [
            {
                "address": [list(d) for d in cells.cell_id(i).address],
                "center": cells.center[i].tolist(),
                "half_width": float(cells.half_width[i]),
            }
            for i in range(len(cells))
        ],
    }


def cell_interval(spec: CarpetSpec, cell: CellId) -> tuple[Fraction, Fraction]:
    """Exact first-axis projection of the cell with the given address."""
    ks = spec.levels[: cell.level]
    if len(ks) != cell.level:
        raise ValueError(f"cell level {cell.level} exceeds carpet depth {spec.depth}")
    c = 0
    for k, digits in zip(ks, cell.address):
        if not 0 <= digits[0] < k:
            raise ValueError(f"cell index {digits[0]} out of range for k = {k}")
        c = c * k + digits[0]
    g = math.prod(ks)
    return Fraction(c, g) - Fraction(1, 2), Fraction(c + 1, g) - Fraction(1, 2)
