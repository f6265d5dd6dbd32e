"""Projective model, inversions in spinal spheres, and translation lengths.

The projective model uses the form
``<<z, w>> = z_1 conj(w_1) + ... + z_n conj(w_n) - z_{n+1} conj(w_{n+1})``
on left F-lines.  Half-space points ``(xi, v, u)`` are transported through
the Siegel lift ``(Z0, eta, Zinf) = (-|xi|^2 - u + v, sqrt(2) xi, 1)``,
whose form ``Z0 conj(Winf) + <eta, eta'> + Zinf conj(W0)`` evaluates to
``-2u`` on the diagonal, followed by a real Cayley change of basis to the
diagonal form above.  In these coordinates the unit-ball involution
``(z', z_n) -> (z', -z_n)`` becomes the inversion in the unit Koranyi-Cygan
sphere, fixing the hyperchain ``{|xi| = 1, v = 0}``.

Isometries act on row vectors from the right (``z -> z M``) so that
matrices commute with left scalar multiplication over H.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import algebra as alg
from .algebra import Algebra, Scalar
from .carnot import (
    CarnotPoint,
    HalfSpacePoint,
    Point,
    as_halfspace,
    dilate,
    group_inv,
    kc_norm,
    translate,
)

SQRT2 = np.sqrt(2.0)


class PointAtInfinity(ArithmeticError):
    """The result (or input) is the point at infinity of the half-space chart."""


class OrbitDegenerate(ArithmeticError):
    """An orbit left the floating-point range; retry with fewer iterations."""


# -- projective model -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A left F-line in F^{n,1}, given by a representative ``(..., n+1, k)``."""

    homog: np.ndarray

    def __post_init__(self):
        h = np.array(self.homog, dtype=float)
        if h.ndim < 2:
            raise ValueError("homogeneous coordinates need shape (..., n+1, k)")
        Algebra.from_dim(h.shape[-1])
        if np.any(np.all(h.reshape(h.shape[:-2] + (-1,)) == 0, axis=-1)):
            raise ValueError("the zero vector does not define a line")
        h.flags.writeable = False
        object.__setattr__(self, "homog", h)

    @property
    def algebra(self) -> Algebra:
        return Algebra.from_dim(self.homog.shape[-1])

    @property
    def n(self) -> int:
        return self.homog.shape[-2] - 1

    def norm2(self) -> np.ndarray:
        """``<<z, z>>`` (real)."""
        return alg.re(hform_array(self.homog, self.homog))

    def is_interior(self) -> np.ndarray:
        return self.norm2() < 0

    def ball_coords(self) -> np.ndarray:
        """Non-homogeneous coordinates ``z_{n+1}^{-1} z_i`` in the unit ball."""
        last = self.homog[..., -1, :]
        return alg.mul(alg.inv(last)[..., None, :], self.homog[..., :-1, :])

    def scaled(self, lam) -> "ProjectivePoint":
        lam = lam.coords if isinstance(lam, Scalar) else np.asarray(lam, dtype=float)
        return ProjectivePoint(alg.scalar_times_vector(lam, self.homog))


def _signature(size: int) -> np.ndarray:
    s = np.ones(size)
    s[-1] = -1.0
    return s


def hform_array(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape[-2:] != w.shape[-2:]:
        raise ValueError(f"dimension mismatch: {z.shape[-2:]} vs {w.shape[-2:]}")
    terms = alg.mul(z, alg.conj(w)) * _signature(z.shape[-2])[:, None]
    return terms.sum(axis=-2)


def hform(z: ProjectivePoint, w: ProjectivePoint) -> np.ndarray:
    """The indefinite Hermitian form ``<<z, w>>`` as algebra components."""
    return hform_array(z.homog, w.homog)


def _arccosh_sqrt_from_log(log_r: np.ndarray) -> np.ndarray:
    # 2 * arccosh(sqrt(R)) written in terms of log R to survive huge R
    log_r = np.maximum(log_r, 0.0)
    return log_r + 2.0 * np.log1p(np.sqrt(-np.expm1(-log_r)))


def dist(z: ProjectivePoint, w: ProjectivePoint) -> np.ndarray:
    """Distance from ``cosh^2(d/2) = <<z,w>><<w,z>> / (<<z,z>><<w,w>>)``."""
    zz = z.norm2()
    ww = w.norm2()
    if np.any(zz >= 0) or np.any(ww >= 0):
        raise ValueError("dist needs interior (negative) points")
    zw = alg.abs2(hform(z, w))
    log_r = np.log(zw) - np.log(-zz) - np.log(-ww)
    return _arccosh_sqrt_from_log(log_r)


def halfspace_dist(p: HalfSpacePoint, q: HalfSpacePoint) -> np.ndarray:
    """The same distance evaluated directly in horospherical coordinates.

    ``cosh^2(d/2) = ((|xi-xi'|^2 + u + u')^2 + |v - v' + 2 Im<xi,xi'>|^2) / (4 u u')``.
    No cancellation occurs, so orbits far out towards the boundary stay
    accurate as long as ``u`` does not underflow.
    """
    if np.any(p.u <= 0) or np.any(q.u <= 0):
        raise ValueError("halfspace_dist needs interior points (u > 0)")
    real = alg.vec_abs2(p.xi - q.xi) + p.u + q.u
    imag = p.v - q.v + 2.0 * alg.im(alg.hermitian(p.xi, q.xi))
    num = real * real + np.einsum("...i,...i->...", imag, imag)
    log_r = np.log(num) - np.log(4.0) - np.log(p.u) - np.log(q.u)
    return _arccosh_sqrt_from_log(log_r)


# -- model transport ------------------------------------------------------


def _cayley(m: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-acting change of basis Siegel -> diagonal form, and its inverse."""
    size = m + 2
    c = np.zeros((size, size))
    cinv = np.zeros((size, size))
    for i in range(m):
        c[1 + i, i] = 1.0
        cinv[i, 1 + i] = 1.0
    r = 1.0 / SQRT2
    c[0, m], c[m + 1, m] = r, r
    c[0, m + 1], c[m + 1, m + 1] = -r, r
    cinv[m, 0], cinv[m + 1, 0] = r, -r
    cinv[m, m + 1], cinv[m + 1, m + 1] = r, r
    return _embed_real(c, k), _embed_real(cinv, k)


def _embed_real(mat: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(mat.shape + (k,))
    out[..., 0] = mat
    return out


def siegel_lift(p: Point) -> np.ndarray:
    p = as_halfspace(p)
    k = p.xi.shape[-1]
    shape = p.batch_shape
    z0 = alg.from_parts(-alg.vec_abs2(p.xi) - p.u, p.v)
    zinf = np.zeros(shape + (k,))
    zinf[..., 0] = 1.0
    eta = np.broadcast_to(SQRT2 * p.xi, shape + p.xi.shape[-2:])
    return np.concatenate([np.broadcast_to(z0, shape + (k,))[..., None, :], eta, zinf[..., None, :]], axis=-2)


def ball_from_halfspace(p: Point) -> ProjectivePoint:
    """Projective representative of a half-space (or boundary) point."""
    s = siegel_lift(p)
    m = s.shape[-2] - 2
    c, _ = _cayley(m, s.shape[-1])
    return ProjectivePoint(apply_matrix(s, c))


def halfspace_from_ball(z: ProjectivePoint, tol: float = 1e-12) -> HalfSpacePoint:
    """Inverse transport; raises ``PointAtInfinity`` on the line through infinity."""
    h = z.homog
    m = h.shape[-2] - 2
    _, cinv = _cayley(m, h.shape[-1])
    s = apply_matrix(h, cinv)
    zinf = s[..., -1, :]
    size = np.sqrt(np.einsum("...ij,...ij->...", h, h))
    if np.any(alg.norm(zinf) <= tol * size):
        raise PointAtInfinity("line through the point at infinity has no half-space chart")
    s = alg.mul(alg.inv(zinf)[..., None, :], s)
    xi = s[..., 1:-1, :] / SQRT2
    z0 = s[..., 0, :]
    u = -alg.re(z0) - alg.vec_abs2(xi)
    scale = 1.0 + alg.vec_abs2(xi) + np.abs(alg.re(z0))
    if np.any(u < -tol * scale):
        raise ValueError("positive line: not in the closure of hyperbolic space")
    u = np.where(u < 0, 0.0, u)
    return HalfSpacePoint(xi, alg.im(z0), u)


def apply_matrix(z, mat) -> np.ndarray:
    """Right action ``(z M)_j = sum_i z_i M_ij`` of an F-matrix on row vectors."""
    z = np.asarray(z, dtype=float)
    return alg.mul(z[..., :, None, :], mat).sum(axis=-3)


def mat_mul(a, b) -> np.ndarray:
    """``(AB)_ij = sum_l A_il B_lj`` with the algebra product kept in order."""
    return alg.mul(a[:, :, None, :], b[None, :, :, :]).sum(axis=1)


# -- inversions -----------------------------------------------------------


def invert(p: Point) -> Point:
    """Inversion in the unit Koranyi-Cygan sphere, valid on boundary and interior.

    With ``B = |xi|^2 + u - v``: ``(xi, v, u) -> (B^{-1} xi, -v/|B|^2, u/|B|^2)``.
    On the boundary this is ``xi/(|xi|^2 - v)``, ``-v/(|v|^2 + |xi|^4)``;
    the inverse of ``B`` multiplies ``xi`` from the left, which is the order
    that commutes with the projective model over H.
    """
    h = as_halfspace(p)
    b = alg.from_parts(alg.vec_abs2(h.xi) + h.u, -h.v)
    b2 = alg.abs2(b)
    if np.any(b2 == 0):
        raise PointAtInfinity("inversion of the origin is the point at infinity")
    binv = alg.conj(b) / b2[..., None]
    xi = alg.mul(binv[..., None, :], h.xi)
    v = -h.v / b2[..., None]
    if isinstance(p, HalfSpacePoint):
        return HalfSpacePoint(xi, v, h.u / b2)
    return CarnotPoint(xi, v)


def invert_unit(p: Point) -> CarnotPoint:
    """Boundary inversion; ``p`` must lie on ``u = 0``."""
    if isinstance(p, HalfSpacePoint):
        if np.any(p.u != 0):
            raise ValueError("invert_unit acts on boundary points (u = 0); use invert")
        p = p.carnot
    return invert(p)


def inversion_matrix(m: int, k: int) -> np.ndarray:
    s = np.zeros((m + 2, m + 2))
    s[0, m + 1] = s[m + 1, 0] = -1.0
    for i in range(m):
        s[1 + i, 1 + i] = 1.0
    return _to_standard(_embed_real(s, k))


def translation_matrix(g: CarnotPoint) -> np.ndarray:
    m, k = g.xi.shape[-2], g.xi.shape[-1]
    s = np.zeros((m + 2, m + 2, k))
    one = np.zeros(k)
    one[0] = 1.0
    s[0, 0] = s[m + 1, m + 1] = one
    for i in range(m):
        s[1 + i, 1 + i] = one
        s[1 + i, 0] = -SQRT2 * alg.conj(g.xi[i])
        s[m + 1, 1 + i] = SQRT2 * g.xi[i]
    s[m + 1, 0] = alg.from_parts(-alg.vec_abs2(g.xi), g.v)
    return _to_standard(s)


def dilation_matrix(lam, m: int, k: int) -> np.ndarray:
    lam = lam.coords if isinstance(lam, Scalar) else alg.from_parts(np.asarray(lam, float), np.zeros(k - 1))
    s = np.zeros((m + 2, m + 2, k))
    one = np.zeros(k)
    one[0] = 1.0
    s[0, 0] = alg.conj(lam)
    s[m + 1, m + 1] = alg.inv(lam)
    for i in range(m):
        s[1 + i, 1 + i] = one
    return _to_standard(s)


def _to_standard(siegel_mat: np.ndarray) -> np.ndarray:
    m = siegel_mat.shape[0] - 2
    k = siegel_mat.shape[-1]
    c, cinv = _cayley(m, k)
    return mat_mul(mat_mul(cinv, siegel_mat), c)


def invert_by_transport(p: Point) -> HalfSpacePoint:
    """Unit inversion computed as ``(z', z_n) -> (z', -z_n)`` in the projective model."""
    h = as_halfspace(p)
    z = ball_from_halfspace(h).homog.copy()
    z[..., -2, :] *= -1.0
    return halfspace_from_ball(ProjectivePoint(z))


# -- balls and bisectors --------------------------------------------------


class Side(enum.IntEnum):
    INSIDE = -1
    ON = 0
    OUTSIDE = 1


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Koranyi-Cygan ball in the Carnot group."""

    center: CarnotPoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        if self.center.xi.ndim != 2:
            raise ValueError("ball center must be a single point")
        object.__setattr__(self, "radius", float(self.radius))

    def normalize(self, p: Point) -> Point:
        """``h_B = D_{1/r} o T_{c^{-1}}``: carries this ball to the unit ball."""
        return dilate(1.0 / self.radius, translate(group_inv(self.center), p))

    def denormalize(self, p: Point) -> Point:
        return translate(self.center, dilate(self.radius, p))

    def translated(self, g: CarnotPoint) -> "Ball":
        return Ball(translate(g, self.center), self.radius)


def invert_in_ball(ball: Ball, p: Point) -> Point:
    """``I_B = h_B^{-1} o I o h_B``; an involution swapping the sides of ``dB``."""
    return ball.denormalize(invert(ball.normalize(p)))


def bisector_side(ball: Ball, p: Point, tol: float = 1e-12) -> np.ndarray:
    """Classify points against the bisector over ``dB``.

    INSIDE is the half-space component whose boundary at infinity is ``B``.
    """
    s = kc_norm(ball.normalize(p))
    out = np.where(s < 1.0, int(Side.INSIDE), int(Side.OUTSIDE))
    out = np.where(np.abs(s - 1.0) <= tol, int(Side.ON), out)
    return out.astype(np.int8)


# -- isometries as words over primitives ----------------------------------


@dataclass(frozen=True)
class Translate:
    g: CarnotPoint

    def __call__(self, p):
        return translate(self.g, p)

    def inverse(self):
        return Translate(group_inv(self.g))

    def matrix(self, m: int, k: int):
        return translation_matrix(self.g)


@dataclass(frozen=True)
class Dilate:
    lam: object  # real number or Scalar

    def __call__(self, p):
        return dilate(self.lam, p)

    def inverse(self):
        if isinstance(self.lam, Scalar):
            return Dilate(self.lam.inverse())
        return Dilate(1.0 / self.lam)

    def matrix(self, m: int, k: int):
        return dilation_matrix(self.lam, m, k)


@dataclass(frozen=True)
class InvertUnit:
    def __call__(self, p):
        return invert(p)

    def inverse(self):
        return self

    def matrix(self, m: int, k: int):
        return inversion_matrix(m, k)


@dataclass(frozen=True)
class InvertInBall:
    ball: Ball

    def __call__(self, p):
        return invert_in_ball(self.ball, p)

    def inverse(self):
        return self

    def expand(self) -> list:
        b = self.ball
        return [Translate(group_inv(b.center)), Dilate(1.0 / b.radius), InvertUnit(),
                Dilate(b.radius), Translate(b.center)]

    def matrix(self, m: int, k: int):
        return Isometry(self.expand()).matrix(m, k)


@dataclass(frozen=True, init=False)
class Isometry:
    """Word of primitives applied in sequence order (first element first)."""

    word: tuple

    def __init__(self, word: Sequence = ()):
        object.__setattr__(self, "word", tuple(word))

    def __call__(self, p):
        for prim in self.word:
            p = prim(p)
        return p

    def then(self, other: "Isometry") -> "Isometry":
        return Isometry(self.word + other.word)

    def inverse(self) -> "Isometry":
        return Isometry(prim.inverse() for prim in reversed(self.word))

    def power(self, e: int) -> "Isometry":
        base = self if e >= 0 else self.inverse()
        return Isometry(base.word * abs(e))

    def matrix(self, m: int, k: int) -> np.ndarray:
        """Right-acting matrix on the projective model (diagonal form)."""
        out = _embed_real(np.eye(m + 2), k)
        for prim in self.word:
            out = mat_mul(out, prim.matrix(m, k))
        return out


# -- translation length ---------------------------------------------------


@dataclass(frozen=True)
class TranslationLength:
    estimate: float  # d(x0, g^N x0) / N
    refined: float  # d(x0, g^{2N} x0) / (2N)
    error: float  # |estimate - refined|
    n_iter: int


def translation_length(g: Callable, x0, n_iter: int = 64) -> TranslationLength:
    """Estimate the translation length of ``g`` from the displacement of an orbit."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    p0 = halfspace_from_ball(x0) if isinstance(x0, ProjectivePoint) else as_halfspace(x0)
    if np.any(p0.u <= 0):
        raise ValueError("base point must be interior")
    q = p0
    marks = {}
    for i in range(1, 2 * n_iter + 1):
        q = g(q)
        if not (np.all(np.isfinite(q.xi)) and np.all(np.isfinite(q.v)) and np.all(np.isfinite(q.u))
                and np.all(q.u > 0)):
            raise OrbitDegenerate(f"orbit left the numerical range after {i} steps; reduce n_iter")
        if i in (n_iter, 2 * n_iter):
            marks[i] = q
    d1 = float(np.max(halfspace_dist(p0, marks[n_iter]))) / n_iter
    d2 = float(np.max(halfspace_dist(p0, marks[2 * n_iter]))) / (2 * n_iter)
    return TranslationLength(d1, d2, abs(d1 - d2), n_iter)
