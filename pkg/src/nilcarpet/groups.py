"""The groups ``E`` (lattice), ``H`` (inversions) and ``Gamma = E * H``.

Words are tuples of letters evaluated left to right (first letter first):

* ``("E", axis, e)``: the lattice step along horizontal chart axis ``axis``, ``e`` times;
* ``("Z", q, e)``: the central element obtained as the commutator of the
  steps along axes ``0`` and ``q`` (non-real algebras only), ``e`` times;
* ``("H", i)``: inversion in generator ball ``i``.

A deformation carries the same letters to the deformed generators, so
``rho_t`` is never formed by conjugating numeric maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import Algebra
from .carnot import (CarnotPoint, HalfSpacePoint, Point, as_halfspace, dilate, group_inv, group_mul, kc_dist,
                     max_deviation, translate)
from .carpet import CarpetSpec, CellTable
from .hyperbolic import Ball, InvertInBall, halfspace_dist, invert_in_ball, translation_length
from .packing import Packing, verify_disjoint
from .stretch import StretchMap

SIDE_TOL = 1e-12


class ReductionFailed(RuntimeError):
    pass


class NoQualifyingPair(RuntimeError):
    pass


# -- words ----------------------------------------------------------------


@dataclass(frozen=True, init=False)
class Word:
    letters: tuple

    def __init__(self, letters=()):
        stack: list = []
        for letter in letters:
            letter = tuple(letter)
            if letter[0] in ("E", "Z"):
                if letter[2] == 0:
                    continue
                if stack and stack[-1][:2] == letter[:2]:
                    e = stack[-1][2] + letter[2]
                    stack.pop()
                    if e:
                        stack.append((letter[0], letter[1], e))
                    continue
            elif letter[0] == "H":
                if stack and stack[-1] == letter:
                    stack.pop()
                    continue
            else:
                raise ValueError(f"unknown letter {letter!r}")
            stack.append(letter)
        object.__setattr__(self, "letters", tuple(stack))

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        out = []
        for letter in reversed(self.letters):
            out.append(letter if letter[0] == "H" else (letter[0], letter[1], -letter[2]))
        return Word(out)

    def __repr__(self):
        return "Word(" + " ".join(_letter_str(l) for l in self.letters) + ")"


def _letter_str(letter) -> str:
    if letter[0] == "H":
        return f"I{letter[1]}"
    return f"{letter[0]}{letter[1]}^{letter[2]}"


# -- ball lookup ----------------------------------------------------------


class BallIndex:
    """Grid buckets over chart bounding boxes of the balls."""

    def __init__(self, centers: np.ndarray, radii: np.ndarray, algebra: Algebra, n: int, cells_per_axis: int = 0):
        self.algebra, self.n = algebra, n
        self.centers, self.radii = centers, radii
        N, dim = centers.shape if len(centers) else (0, (n - 1) * algebra.dim + algebra.im_dim)
        m = (n - 1) * algebra.dim
        ext = np.repeat(radii[:, None], dim, axis=1) if N else np.zeros((0, dim))
        if N and algebra is not Algebra.R:
            xin = np.linalg.norm(centers[:, :m], axis=1)
            ext[:, m:] = (radii * radii + 2.0 * xin * radii)[:, None]
        self.lo = centers - ext
        self.hi = centers + ext
        if N == 0:
            self.table = np.full((1, 1), -1, dtype=np.int64)
            self.g = 1
            self.box_lo = np.zeros(dim)
            self.box_hi = np.zeros(dim)
            return
        self.box_lo = self.lo.min(axis=0)
        self.box_hi = self.hi.max(axis=0)
        g = cells_per_axis or max(1, min(81, int(round((1 << 17) ** (1.0 / dim)))))
        self.g = g
        span = np.maximum(self.box_hi - self.box_lo, 1e-300)
        a = np.clip(np.floor((self.lo - self.box_lo) / span * g), 0, g - 1).astype(np.int64)
        b = np.clip(np.floor((self.hi - self.box_lo) / span * g), 0, g - 1).astype(np.int64)
        buckets: dict[int, list] = {}
        for i in range(N):
            ranges = [range(a[i, d], b[i, d] + 1) for d in range(dim)]
            for idx in np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, dim):
                buckets.setdefault(int(np.ravel_multi_index(idx, (g,) * dim)), []).append(i)
        width = max(len(v) for v in buckets.values())
        table = np.full((g ** dim + 1, width), -1, dtype=np.int64)
        for key, members in buckets.items():
            table[key, : len(members)] = members
        self.table = table  # last row: empty bucket for points outside the grid

    def candidates(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if len(self.centers) == 0:
            return np.full((len(x), 1), -1, dtype=np.int64)
        dim = x.shape[1]
        span = np.maximum(self.box_hi - self.box_lo, 1e-300)
        idx = np.floor((x - self.box_lo) / span * self.g).astype(np.int64)
        outside = np.any((x < self.box_lo) | (x > self.box_hi), axis=1)
        idx = np.clip(idx, 0, self.g - 1)
        flat = np.ravel_multi_index(tuple(idx.T), (self.g,) * dim)
        flat = np.where(outside, self.g ** dim, flat)
        return self.table[flat]

    def gauge_ratio(self, p: HalfSpacePoint) -> tuple[np.ndarray, np.ndarray]:
        """For each point: candidate ball indices and ``rho(p, c_i) / r_i`` (inf for empty slots)."""
        chart = np.atleast_2d(p.to_chart())
        cand = self.candidates(chart)
        u = np.atleast_1d(np.broadcast_to(p.u, p.batch_shape)).reshape(-1)
        ratio = np.full(cand.shape, np.inf)
        for s in range(cand.shape[1]):
            b = cand[:, s]
            ok = b >= 0
            if not ok.any():
                continue
            q = HalfSpacePoint(*_split(chart[ok], self.algebra, self.n), u[ok])
            c = CarnotPoint(*_split(self.centers[b[ok]], self.algebra, self.n))
            ratio[ok, s] = kc_dist(q, c) / self.radii[b[ok]]
        return cand, ratio


def _split(x, algebra: Algebra, n: int):
    m = (n - 1) * algebra.dim
    return x[..., :m].reshape(x.shape[:-1] + (n - 1, algebra.dim)), x[..., m:]


# -- group data -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupSpec:
    algebra: Algebra
    n: int
    steps: tuple  # horizontal lattice generators (CarnotPoint), one per chart axis
    central: tuple  # central elements Z_q (non-real only)
    ball_centers: np.ndarray  # chart coordinates of generator balls
    ball_radii: np.ndarray
    ball_index: tuple  # packing index of each generator ball
    ball_cell: tuple  # owning CellTable row of each generator ball
    excluded: tuple
    col_lo: np.ndarray  # horizontal column bounds
    col_hi: np.ndarray
    v_period: float
    depth: int
    pack_depth: int
    index: BallIndex = field(repr=False)

    @property
    def generators_E(self) -> tuple:
        return self.steps

    @property
    def generators_H(self) -> list:
        return [self.ball(i) for i in range(len(self.ball_radii))]

    def ball(self, i: int) -> Ball:
        xi, v = _split(self.ball_centers[i], self.algebra, self.n)
        return Ball(CarnotPoint(xi, v), float(self.ball_radii[i]))

    @property
    def limit_set_full(self) -> bool:
        """No ball removed: the limit set is the whole sphere; otherwise a discontinuity set exists."""
        return len(self.excluded) == 0

    def letter(self, letter):
        kind = letter[0]
        if kind == "E":
            g = self.steps[letter[1]]
            return lambda p, g=g, e=letter[2]: translate(CarnotPoint(e * g.xi, g.v), p)
        if kind == "Z":
            z = self.central[letter[1] - 1]
            return lambda p, z=z, e=letter[2]: translate(CarnotPoint(z.xi, e * z.v), p)
        if kind == "H":
            return InvertInBall(self.ball(letter[1]))
        raise ValueError(f"unknown letter {letter!r}")

    def to_record(self) -> dict:
        return {
            "format": "nilcarpet.group",
            "version": 1,
            "algebra": self.algebra.name,
            "n": self.n,
            "depth": self.depth,
            "pack_depth": self.pack_depth,
            "generators_E": [s.xi.reshape(-1).tolist() for s in self.steps],
            "central": [z.v.tolist() for z in self.central],
            "v_period": self.v_period,
            "generators_H": [
                {"packing_index": int(self.ball_index[i]), "center": self.ball_centers[i].tolist(),
                 "radius": float(self.ball_radii[i])}
                for i in range(len(self.ball_radii))
            ],
            "excluded": list(self.excluded),
            "limit_set_full": self.limit_set_full,
        }


def _unit_steps(algebra: Algebra, n: int, first: float = 1.0) -> tuple:
    m = (n - 1) * algebra.dim
    out = []
    for a in range(m):
        xi = np.zeros(m)
        xi[a] = first if a == 0 else 1.0
        out.append(CarnotPoint(xi.reshape(n - 1, algebra.dim), np.zeros(algebra.im_dim)))
    return tuple(out)


def _commutator(a: CarnotPoint, b: CarnotPoint) -> CarnotPoint:
    return group_mul(group_mul(a, b), group_mul(group_inv(a), group_inv(b)))


def _central(steps: tuple, algebra: Algebra) -> tuple:
    """``Z_q``: commutator of the axis-0 and axis-q steps, oriented along ``+e_q``."""
    out = []
    for q in range(1, algebra.dim):
        z = _commutator(steps[0], steps[q])
        if z.v[q - 1] < 0:
            z = _commutator(steps[q], steps[0])
        out.append(z)
    return tuple(out)


def _assemble(algebra, n, steps, centers, radii, ball_index, ball_cell, excluded, col_lo, col_hi, depth,
              pack_depth) -> GroupSpec:
    central = _central(steps, algebra) if algebra is not Algebra.R else ()
    v_period = float(max(np.abs(z.v).max() for z in central)) if central else 0.0
    return GroupSpec(algebra, n, steps, central, centers, radii, tuple(ball_index), tuple(ball_cell),
                     tuple(excluded), col_lo, col_hi, v_period, depth, pack_depth,
                     BallIndex(centers, radii, algebra, n))


def build_group(carpet: CarpetSpec, packing: Packing, cells: CellTable | None = None,
                check_disjoint: bool = True) -> GroupSpec:
    a, n = packing.algebra, packing.n
    m = (n - 1) * a.dim
    if carpet.dim != m + a.im_dim:
        raise ValueError(f"packing ({a.name}, n={n}) does not match carpet dim {carpet.dim}")
    if cells is not None and len(packing) and int(packing.cell.max()) >= len(cells):
        raise ValueError("packing refers to cells the carpet does not have")
    if check_disjoint:
        ok, margin = verify_disjoint(packing)
        if not ok:
            raise ValueError(f"packing balls overlap (margin {margin})")
    active = packing.active
    return _assemble(a, n, _unit_steps(a, n), packing.centers[active], packing.radii[active], active,
                     [int(packing.cell[i]) for i in active], packing.excluded, np.full(m, -0.5),
                     np.full(m, 0.5), carpet.depth, packing.pack_depth)


# -- deformation ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Deformation:
    t: float
    stretch: StretchMap
    group: GroupSpec  # deformed generators, same letters
    base: GroupSpec
    shifts: np.ndarray  # cell translation of each generator ball

    def letter(self, letter):
        return self.group.letter(letter)


def deform(group: GroupSpec, stretch: StretchMap, cells: CellTable) -> Deformation:
    if stretch.carpet is None or stretch.carpet.depth != group.depth:
        raise ValueError("stretch map must come from the carpet the group was built on")
    a, n = group.algebra, group.n
    shifts = np.array([stretch.cell_translation(cells.cell_id(c)) for c in group.ball_cell])
    centers = group.ball_centers.copy()
    if len(centers):
        moved = translate(CarnotPoint(_e1(a, n, shifts), np.zeros((len(shifts), a.im_dim))),
                          CarnotPoint(*_split(centers, a, n)))
        centers = moved.to_chart()
    col_lo = group.col_lo.copy()
    col_hi = group.col_hi.copy()
    col_lo[0], col_hi[0] = stretch.lo_end, stretch.hi_end
    deformed = _assemble(a, n, _unit_steps(a, n, stretch.t1()), centers, group.ball_radii, group.ball_index,
                         group.ball_cell, group.excluded, col_lo, col_hi, group.depth, group.pack_depth)
    return Deformation(stretch.t, stretch, deformed, group, shifts)


def _e1(a: Algebra, n: int, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    xi = np.zeros(c.shape + (n - 1, a.dim))
    xi[..., 0, 0] = c
    return xi


def carnot_shift(c, algebra, n: int) -> CarnotPoint:
    """The Carnot translation ``T_{c e1}``."""
    a = Algebra.parse(algebra)
    c = np.asarray(c, dtype=float)
    return CarnotPoint(_e1(a, n, c), np.zeros(c.shape + (a.im_dim,)))


# -- evaluation -----------------------------------------------------------


def _group(g) -> GroupSpec:
    return g.group if isinstance(g, Deformation) else g


def apply_word(g, w, p: Point) -> Point:
    grp = _group(g)
    for letter in (w.letters if isinstance(w, Word) else Word(w).letters):
        p = grp.letter(letter)(p)
    return p


def in_column(group, p: Point, open_: bool = False) -> np.ndarray:
    grp = _group(group)
    chart = p.to_chart()
    m = (grp.n - 1) * grp.algebra.dim
    x = chart[..., :m]
    if open_:
        ok = np.all((x > grp.col_lo) & (x < grp.col_hi), axis=-1)
    else:
        ok = np.all((x >= grp.col_lo) & (x <= grp.col_hi), axis=-1)
    if grp.v_period:
        v = np.abs(chart[..., m:])
        half = grp.v_period / 2.0
        ok &= np.all(v < half if open_ else v <= half, axis=-1)
    return ok


def ball_sides(group, p: Point, tol: float = SIDE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Index of a generator ball whose inside region holds ``p`` (or -1), and whether any side test is ON."""
    grp = _group(group)
    h = as_halfspace(p)
    cand, ratio = grp.index.gauge_ratio(h)
    inside = ratio < 1.0 - tol
    on = np.abs(ratio - 1.0) <= tol
    first = np.where(inside.any(axis=1), cand[np.arange(len(cand)), np.argmax(inside, axis=1)], -1)
    shape = h.batch_shape
    return first.reshape(shape), on.any(axis=1).reshape(shape)


def in_polyhedron(group, p: Point, tol: float = SIDE_TOL) -> np.ndarray:
    """Column membership and strictly outside every generator ball."""
    h = as_halfspace(p)
    inside, on = ball_sides(group, h, tol)
    return in_column(group, h) & (inside < 0) & ~on


def reduce(group, p: Point, max_steps: int = 64) -> tuple[Word, HalfSpacePoint]:
    """Greedy normal form: returns ``(w, q)`` with ``q`` in the polyhedron and ``w(q) = p``."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    grp = _group(group)
    q = as_halfspace(p)
    if q.batch_shape != ():
        raise ValueError("reduce works on a single point")
    width = grp.col_hi - grp.col_lo
    m = len(width)
    applied: list = []
    steps = 0
    while True:
        moved = False
        x = q.to_chart()
        for a in range(m):
            k = math.floor((x[a] - grp.col_lo[a]) / width[a])
            if x[a] == grp.col_hi[a]:
                k = 0
            if k:
                applied.append(("E", a, -k))
                q = grp.letter(applied[-1])(q)
                x = q.to_chart()
                moved = True
        for j, z in enumerate(grp.central):
            per = grp.v_period
            k = math.floor((x[m + j] + per / 2.0) / per)
            if x[m + j] == per / 2.0:
                k = 0
            if k:
                applied.append(("Z", j + 1, -k))
                q = grp.letter(applied[-1])(q)
                x = q.to_chart()
                moved = True
        inside, _ = ball_sides(grp, q)
        if int(inside) >= 0:
            applied.append(("H", int(inside)))
            q = grp.letter(applied[-1])(q)
            moved = True
        if not moved:
            break
        steps += 1
        if steps >= max_steps:
            raise ReductionFailed(f"no reduction within {max_steps} steps")
    return Word(applied).inverse(), q


# -- checks ---------------------------------------------------------------


def _sample_column(grp: GroupSpec, size: int, rng: np.random.Generator, u_max: float = 0.0) -> HalfSpacePoint:
    a, n = grp.algebra, grp.n
    m = (n - 1) * a.dim
    x = rng.uniform(grp.col_lo, grp.col_hi, size=(size, m))
    v = rng.uniform(-grp.v_period / 2.0, grp.v_period / 2.0, size=(size, a.im_dim)) if grp.v_period else np.zeros(
        (size, 0))
    u = rng.uniform(0.0, u_max, size=size) if u_max else np.zeros(size)
    return HalfSpacePoint(x.reshape(size, n - 1, a.dim), v, u)


def _sample_polyhedron(grp: GroupSpec, size: int, rng: np.random.Generator, u_max: float) -> HalfSpacePoint:
    got = []
    total = 0
    for _ in range(64):
        cand = _sample_column(grp, 4 * size, rng, u_max)
        keep = in_polyhedron(grp, cand) & (cand.u > 0)
        sel = cand[np.nonzero(keep)[0]]
        got.append(sel)
        total += len(sel.u)
        if total >= size:
            break
    xi = np.concatenate([g.xi for g in got])[:size]
    v = np.concatenate([g.v for g in got])[:size]
    u = np.concatenate([g.u for g in got])[:size]
    return HalfSpacePoint(xi, v, u)


def _near_ball(grp: GroupSpec, i: int, size: int, rng: np.random.Generator) -> HalfSpacePoint:
    """Points around ball ``i`` at gauge scale ``2 r``, heights up to ``(2 r)^2``."""
    a, n = grp.algebra, grp.n
    r = float(grp.ball_radii[i])
    m = (n - 1) * a.dim
    c = grp.ball_centers[i]
    off = rng.uniform(-2.0 * r, 2.0 * r, size=(size, len(c)))
    off[:, m:] *= 2.0 * r
    x = np.clip(c + off, -0.5, 0.5)
    xi, v = _split(x, a, n)
    return HalfSpacePoint(xi, v, rng.uniform(0.0, 4.0 * r * r, size=size))


def random_word(grp: GroupSpec, length: int, rng: np.random.Generator) -> Word:
    letters: list = []
    m = len(grp.steps)
    nh = len(grp.ball_radii)
    while len(Word(letters)) < length:
        kind = rng.integers(0, 2) if nh and m else (1 if nh else 0)
        if kind == 0:
            letters.append(("E", int(rng.integers(0, m)), int(rng.choice([-1, 1]))))
        else:
            letters.append(("H", int(rng.integers(0, nh))))
        letters = list(Word(letters).letters)
    return Word(letters)


@dataclass
class CheckReport:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)
    max_deviation: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, what: str, **info):
        self.failures.append({"check": what, **info})

    def to_record(self) -> dict:
        return {"name": self.name, "cases": self.cases, "failures": self.failures,
                "max_deviation": self.max_deviation, "details": self.details}


def klein_check(group, samples: int, seed: int, per_ball: int = 16) -> CheckReport:
    """Klein combination hypotheses on samples.

    (i) every inversion sends polyhedron points into its ball,
    (ii) generator balls are pairwise disjoint,
    (iii) lattice translates of the open column miss the open column.
    """
    grp = _group(group)
    rng = np.random.default_rng(seed)
    rep = CheckReport("klein")
    nb = len(grp.ball_radii)
    # (i)
    for i in range(nb):
        pts = _near_ball(grp, i, 4 * per_ball, rng)
        pts = pts[np.nonzero(in_polyhedron(grp, pts) & (pts.u > 0))[0][:per_ball]]
        if len(np.atleast_1d(pts.u)) == 0:
            continue
        img = invert_in_ball(grp.ball(i), pts)
        ratio = kc_dist(img, grp.ball(i).center) / grp.ball_radii[i]
        rep.cases += len(ratio)
        bad = np.nonzero(ratio >= 1.0 - SIDE_TOL)[0]
        if len(bad):
            rep.fail("inversion image outside its ball", ball=i, count=int(len(bad)),
                     worst_ratio=float(ratio.max()))
    glob = _sample_polyhedron(grp, samples, rng, u_max=0.25)
    for i in range(nb):
        img = invert_in_ball(grp.ball(i), glob)
        ratio = kc_dist(img, grp.ball(i).center) / grp.ball_radii[i]
        rep.cases += len(ratio)
        if np.any(ratio >= 1.0 - SIDE_TOL):
            rep.fail("inversion image outside its ball", ball=i, count=int((ratio >= 1.0 - SIDE_TOL).sum()),
                     worst_ratio=float(ratio.max()))
    # (ii)
    if nb > 1:
        fake = Packing(grp.algebra, grp.n, grp.ball_centers, grp.ball_radii, np.zeros(nb, dtype=np.int64))
        ok, margin = verify_disjoint(fake)
        rep.cases += nb * (nb - 1) // 2
        rep.details["min_ball_margin"] = margin
        if not ok:
            rep.fail("generator balls overlap", margin=margin)
    # (iii)
    col = _sample_column(grp, samples, rng)
    col = col[np.nonzero(in_column(grp, col, open_=True))[0]]
    moves = [("E", a, s) for a in range(len(grp.steps)) for s in (-1, 1)]
    moves += [("Z", q + 1, s) for q in range(len(grp.central)) for s in (-1, 1)]
    for mv in moves:
        img = grp.letter(mv)(col)
        hit = in_column(grp, img, open_=True)
        rep.cases += len(hit)
        if hit.any():
            rep.fail("lattice translate meets the open column", letter=list(mv), count=int(hit.sum()))
    return rep


def stretch_global(fmap: StretchMap, p: Point) -> Point:
    """``f_t`` on the whole group: ``x1 -> psi_t`` extended by ``psi(x + 1) = psi(x) + t1``."""
    xi = np.array(p.xi)
    xi[..., 0, 0] = fmap.psi_periodic(p.xi[..., 0, 0])
    if isinstance(p, HalfSpacePoint):
        return HalfSpacePoint(xi, p.v, p.u)
    return CarnotPoint(xi, p.v)


def _on_sphere(ball: Ball, size: int, rng: np.random.Generator) -> CarnotPoint:
    """Uniform-direction points on the gauge sphere ``dB``."""
    c = ball.center
    k = c.xi.shape[-1]
    n1 = c.xi.shape[-2]
    eta = rng.standard_normal((size, n1, k))
    eta /= np.sqrt(np.einsum("...ij,...ij->...", eta, eta))[:, None, None]
    if k > 1:
        s = rng.standard_normal((size, k - 1))
        s /= np.linalg.norm(s, axis=1, keepdims=True)
        w = rng.uniform(0.0, 1.0, size=size)  # |eta|^4 + |s|^2 = 1
        eta *= (w ** 0.25)[:, None, None]
        s *= np.sqrt(1.0 - w)[:, None]
    else:
        s = np.zeros((size, 0))
    return ball.denormalize(CarnotPoint(eta, s))


def _in_ball(ball: Ball, size: int, rng: np.random.Generator) -> CarnotPoint:
    """Points of the open gauge ball at relative radius below 0.9."""
    unit = Ball(CarnotPoint.origin(ball.center.algebra, ball.center.n), 1.0)
    q = _on_sphere(unit, size, rng)
    return ball.denormalize(dilate(rng.uniform(0.05, 0.9, size=size), q))


def equivariance_check(group: GroupSpec, deformation: Deformation, samples: int, seed: int,
                       tol: float = 1e-9) -> CheckReport:
    """``f_t(gamma p) = gamma_t(f_t p)`` generator by generator on boundary samples.

    Lattice steps use column samples; an inversion uses points of its gauge
    sphere and points outside the ball in the strip over its first-axis
    shadow, whose images stay over the same gap component.
    """
    rng = np.random.default_rng(seed)
    fmap = deformation.stretch
    rep = CheckReport("equivariance", details={"t": deformation.t})
    worst = 0.0
    for a in range(len(group.steps)):
        letter = ("E", a, 1)
        p = _sample_column(group, samples, rng).carnot
        lhs = stretch_global(fmap, group.letter(letter)(p))
        rhs = deformation.letter(letter)(stretch_global(fmap, p))
        dev = max_deviation(lhs, rhs)
        rep.cases += samples
        worst = max(worst, dev)
        if dev > tol:
            rep.fail("lattice generator", letter=list(letter), deviation=dev)
    for i in range(len(group.ball_radii)):
        ball = group.ball(i)
        sphere = _on_sphere(ball, samples // 2, rng)
        strip = _sample_column(group, samples - samples // 2, rng).carnot
        lo = ball.center.xi[0, 0] - ball.radius
        hi = ball.center.xi[0, 0] + ball.radius
        sx = np.array(strip.xi)
        sx[:, 0, 0] = rng.uniform(lo, hi, size=len(sx))
        strip = CarnotPoint(sx, strip.v)
        # inside the ball the inversion may throw points out of the strip
        strip = strip[np.nonzero(kc_dist(strip, ball.center) > ball.radius)[0]]
        p = CarnotPoint(np.concatenate([sphere.xi, strip.xi]), np.concatenate([sphere.v, strip.v]))
        lhs = stretch_global(fmap, invert_in_ball(ball, p))
        rhs = invert_in_ball(deformation.group.ball(i), stretch_global(fmap, p))
        dev = max_deviation(lhs, rhs)
        rep.cases += len(p.xi)
        worst = max(worst, dev)
        if dev > tol:
            rep.fail("inversion generator", ball=i, deviation=dev)
    rep.max_deviation = worst
    return rep


@dataclass(frozen=True)
class WitnessReport:
    pair: tuple
    components: tuple
    ell_a: float
    ell_b: float
    err_a: float
    err_b: float
    t_a: float
    t_b: float
    n_iter: int

    @property
    def difference(self) -> float:
        return abs(self.ell_a - self.ell_b)

    @property
    def error(self) -> float:
        return self.err_a + self.err_b

    @property
    def nontrivial(self) -> bool:
        return self.difference > 3.0 * self.error

    def to_record(self) -> dict:
        return {"pair": list(self.pair), "components": list(self.components), "t": [self.t_a, self.t_b],
                "ell": [self.ell_a, self.ell_b], "err": [self.err_a, self.err_b], "difference": self.difference,
                "error": self.error, "nontrivial": self.nontrivial, "n_iter": self.n_iter}


def qualifying_pair(deformation: Deformation) -> tuple[tuple[int, int], tuple[int, int]]:
    """First generator pair (in enumeration order) over distinct gap components."""
    fmap = deformation.stretch
    cells_spec = fmap.carpet
    comps = []
    for i in range(len(deformation.base.ball_radii)):
        c = deformation.base.ball_centers[i, 0]
        comps.append(int(fmap.delta1.component(c)))
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            if comps[i] >= 0 and comps[j] >= 0 and comps[i] != comps[j]:
                return (i, j), (comps[i], comps[j])
    raise NoQualifyingPair(
        f"no two generator balls project to distinct gap components at depth {cells_spec.depth}; increase depth")


def pair_length(grp: GroupSpec, i: int, j: int, n_iter: int | None = None):
    """Translation length of ``I_i I_j`` (apply ``I_j`` first)."""
    bi, bj = grp.ball(i), grp.ball(j)
    g = lambda p: invert_in_ball(bi, invert_in_ball(bj, p))
    rho = float(kc_dist(bi.center, bj.center))
    mid = CarnotPoint((bi.center.xi + bj.center.xi) / 2.0, (bi.center.v + bj.center.v) / 2.0)
    x0 = mid.at_height((rho / 2.0) ** 2)
    if n_iter is None:
        step = float(halfspace_dist(x0, as_halfspace(g(x0))))
        n_iter = int(np.clip(600.0 / (2.0 * max(step, 1e-3)), 4, 64))
    return translation_length(g, x0, n_iter)


def nontriviality_witness(def_a: Deformation, def_b: Deformation, pair: tuple | None = None) -> WitnessReport:
    (i, j), comps = qualifying_pair(def_a) if pair is None else (pair, (-1, -1))
    la = pair_length(def_a.group, i, j)
    lb = pair_length(def_b.group, i, j, la.n_iter)
    return WitnessReport((i, j), comps, la.refined, lb.refined, la.error, lb.error, def_a.t, def_b.t, la.n_iter)


def boundary_triviality_check(group: GroupSpec, deformation: Deformation, packing: Packing, cells: CellTable,
                              samples: int, seed: int) -> CheckReport:
    """On each excluded ball's cell column ``f_t`` is one Carnot translation."""
    rng = np.random.default_rng(seed)
    fmap = deformation.stretch
    a, n = group.algebra, group.n
    rep = CheckReport("boundary_trivial", details={"t": deformation.t, "excluded": list(packing.excluded)})
    if not packing.excluded:
        rep.fail("no excluded balls")
        return rep
    if tuple(group.excluded) != tuple(packing.excluded):
        raise ValueError("group was not built from this packing's exclusions")
    worst = 0.0
    for b in packing.excluded:
        cell = int(packing.cell[b])
        cid = cells.cell_id(cell)
        c = fmap.cell_translation(cid)
        lo, hi = (float(x) for x in _cell_proj(cells, cell))
        p = _sample_column(group, samples, rng).carnot
        xi = np.array(p.xi)
        xi[:, 0, 0] = rng.uniform(lo, hi, size=samples)
        p = CarnotPoint(xi, p.v)
        lhs = fmap.apply(p)
        rhs = translate(carnot_shift(c, a, n), p)
        dev = max(float(np.max(np.abs(lhs.xi - rhs.xi))), float(np.max(np.abs(lhs.v - rhs.v), initial=0.0)))
        worst = max(worst, dev)
        rep.cases += samples
        rep.details.setdefault("translations", []).append({"ball": int(b), "c": c, "deviation": dev})
        if dev != 0.0:
            rep.fail("column map is not one translation", ball=int(b), deviation=dev)
        # the open excluded ball stays in the polyhedron: it seeds the discontinuity set
        inner = _in_ball(packing.ball(b), 64, rng)
        seeded = in_polyhedron(group, inner.at_height(0.0))
        rep.cases += len(seeded)
        if not np.all(seeded):
            rep.fail("excluded ball meets a generator ball", ball=int(b))
    # slope of psi_t differs from 1 only over the carpet projection
    x = rng.uniform(-0.5, 0.5, size=4 * samples)
    h = 1e-6
    gap = fmap.delta1.contains(x) & fmap.delta1.contains(x + h)
    far = ~fmap.delta1.contains(x) & ~fmap.delta1.contains(x + h) & (x + h <= 0.5)
    edge = fmap.delta1
    for lo_, hi_ in edge:
        far &= ~((x < lo_) & (x + h > lo_)) & ~((x < hi_) & (x + h > hi_))
    s_gap = fmap.slope(x[gap], h)
    s_far = fmap.slope(x[far], h)
    rep.details["slope_in_gap"] = [float(s_gap.min()), float(s_gap.max())] if len(s_gap) else []
    rep.details["slope_on_carpet"] = [float(s_far.min()), float(s_far.max())] if len(s_far) else []
    rep.cases += len(s_gap) + len(s_far)
    if len(s_gap) and np.max(np.abs(s_gap - 1.0)) > 1e-6:
        rep.fail("slope differs from 1 inside the gap set")
    if len(s_far) and np.max(np.abs(s_far - fmap.t)) > 1e-6 * max(1.0, fmap.t):
        rep.fail("slope over the carpet projection is not t")
    if fmap.t != 1.0 and len(s_far) and np.min(np.abs(s_far - 1.0)) < 1e-9:
        rep.fail("slope over the carpet projection equals 1 although t != 1")
    rep.max_deviation = worst
    return rep


def _cell_proj(cells: CellTable, i: int):
    return cells.interval(i)


def base_point(group) -> HalfSpacePoint:
    """A point of the open polyhedron above the column center."""
    grp = _group(group)
    m = len(grp.col_lo)
    mid = (grp.col_lo + grp.col_hi) / 2.0
    xi, _ = _split(np.concatenate([mid, np.zeros(grp.algebra.im_dim)]), grp.algebra, grp.n)
    for u in (1.0, 4.0, 16.0, 64.0):
        p = HalfSpacePoint(xi, np.zeros(grp.algebra.im_dim), u)
        if bool(in_polyhedron(grp, p)):
            return p
    raise ValueError(f"no polyhedron point above the column center among heights up to 64 (m={m})")


def free_relation_check(group, words_per_length: int, seed: int, max_length: int = 6,
                        min_move: float = 1e-6, tol: float = 1e-10) -> CheckReport:
    """Only ``I_i^2 = 1`` holds: reduced words move a polyhedron point."""
    grp = _group(group)
    rng = np.random.default_rng(seed)
    rep = CheckReport("free_relations")
    x0 = base_point(grp)
    smallest = math.inf
    for length in range(1, max_length + 1):
        for _ in range(words_per_length):
            w = random_word(grp, length, rng)
            d = float(kc_dist(apply_word(grp, w, x0), x0))
            smallest = min(smallest, d)
            rep.cases += 1
            if not d > min_move:
                rep.fail("reduced word fixes the base point", word=[list(l) for l in w], move=d)
    worst = 0.0
    # points at the ball's own scale; far points are squeezed to within r^2/rho of
    # the center and the round trip then amplifies rounding by (rho/r)^2
    for i in range(len(grp.ball_radii)):
        b = grp.ball(i)
        pts = _near_ball(grp, i, 32, rng)
        worst = max(worst, max_deviation(invert_in_ball(b, invert_in_ball(b, pts)), pts))
        rep.cases += 1
    if worst > tol:
        rep.fail("inversion is not an involution", deviation=worst)
    rep.max_deviation = worst
    rep.details["smallest_move"] = smallest
    return rep


def orbit_disjointness_check(group, pairs: int, samples: int, seed: int, max_length: int = 3) -> CheckReport:
    """Images of the open polyhedron under distinct short words do not meet."""
    grp = _group(group)
    rng = np.random.default_rng(seed)
    rep = CheckReport("orbit_disjoint")
    pts = _sample_polyhedron(grp, samples, rng, u_max=0.25)
    for _ in range(pairs):
        w1 = random_word(grp, int(rng.integers(0, max_length + 1)), rng)
        w2 = random_word(grp, int(rng.integers(0, max_length + 1)), rng)
        rel = w1 + w2.inverse()  # w2^-1 o w1 in application order
        if len(rel) == 0:
            continue
        hit = in_polyhedron(grp, apply_word(grp, rel, pts))
        rep.cases += len(hit)
        if hit.any():
            rep.fail("word images overlap", w1=[list(l) for l in w1], w2=[list(l) for l in w2],
                     count=int(hit.sum()))
    return rep


def limit_set_proxy(carpet_measure: float, coverage: float) -> dict:
    """Share of the column base left to the limit set once the packed balls are discounted."""
    removed = 1.0 - carpet_measure
    return {
        "carpet_measure": carpet_measure,
        "removed_measure": removed,
        "covered": coverage * removed,
        "residual": 1.0 - coverage * removed - carpet_measure,
    }
