"""The Carnot group at infinity and its horospherical extension.

Points carry batch axes: ``xi`` has shape ``(..., n-1, k)``, ``v`` has shape
``(..., k-1)`` and ``u`` has shape ``(...)``, with ``k`` the real dimension
of the algebra.  Every operation broadcasts over the leading axes so that a
single call handles ten thousand random samples.

Group law: ``(xi, v) * (xi', v') = (xi + xi', v + v' + 2 Im<xi, xi'>)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as alg
from .algebra import Algebra, Scalar


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CarnotPoint:
    xi: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        xi = _frozen(self.xi)
        v = _frozen(self.v)
        if xi.ndim < 2:
            raise ValueError("xi must have shape (..., n-1, k)")
        k = xi.shape[-1]
        Algebra.from_dim(k)
        if v.shape[-1:] != (k - 1,):
            raise ValueError(f"v must have trailing length {k - 1} for this algebra")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "v", v)

    @property
    def algebra(self) -> Algebra:
        return Algebra.from_dim(self.xi.shape[-1])

    @property
    def n(self) -> int:
        return self.xi.shape[-2] + 1

    @property
    def batch_shape(self) -> tuple:
        return np.broadcast_shapes(self.xi.shape[:-2], self.v.shape[:-1])

    @classmethod
    def origin(cls, algebra, n: int) -> "CarnotPoint":
        a = Algebra.parse(algebra)
        return cls(np.zeros((n - 1, a.dim)), np.zeros(a.im_dim))

    @classmethod
    def of(cls, xi, v=None, algebra=None) -> "CarnotPoint":
        """Build a single point from Scalars / numbers (convenience for examples)."""
        xi_list = list(xi) if isinstance(xi, (list, tuple)) else [xi]
        a = Algebra.parse(algebra) if algebra is not None else None
        coords = []
        for s in xi_list:
            if isinstance(s, Scalar):
                a = a or s.algebra
                coords.append(s.coords)
            else:
                coords.append(None)
        a = a or Algebra.R
        coords = [c if c is not None else Scalar.of(a, float(s)).coords for c, s in zip(coords, xi_list)]
        if v is None:
            vv = np.zeros(a.im_dim)
        elif isinstance(v, alg.ImScalar):
            vv = v.coords
        else:
            vv = np.asarray(v, dtype=float).reshape(a.im_dim)
        return cls(np.stack(coords), vv)

    def at_height(self, u) -> "HalfSpacePoint":
        return HalfSpacePoint(self.xi, self.v, np.broadcast_to(np.asarray(u, dtype=float), self.batch_shape))

    def to_chart(self) -> np.ndarray:
        return to_chart(self.xi, self.v)

    @classmethod
    def from_chart(cls, x, algebra, n: int) -> "CarnotPoint":
        xi, v = from_chart(x, Algebra.parse(algebra), n)
        return cls(xi, v)

    def __getitem__(self, idx) -> "CarnotPoint":
        xi = np.broadcast_to(self.xi, self.batch_shape + self.xi.shape[-2:])
        v = np.broadcast_to(self.v, self.batch_shape + self.v.shape[-1:])
        return CarnotPoint(xi[idx], v[idx])

    def __repr__(self):
        return f"CarnotPoint(xi={self.xi.tolist()}, v={self.v.tolist()})"


@dataclass(frozen=True, eq=False)
class HalfSpacePoint:
    xi: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        base = CarnotPoint(self.xi, self.v)
        u = _frozen(self.u)
        if np.any(u < 0):
            raise ValueError("horospherical height u must be nonnegative")
        object.__setattr__(self, "xi", base.xi)
        object.__setattr__(self, "v", base.v)
        object.__setattr__(self, "u", u)

    @property
    def algebra(self) -> Algebra:
        return Algebra.from_dim(self.xi.shape[-1])

    @property
    def n(self) -> int:
        return self.xi.shape[-2] + 1

    @property
    def batch_shape(self) -> tuple:
        return np.broadcast_shapes(self.xi.shape[:-2], self.v.shape[:-1], self.u.shape)

    @property
    def carnot(self) -> CarnotPoint:
        return CarnotPoint(self.xi, self.v)

    @property
    def is_boundary(self) -> np.ndarray:
        return self.u == 0

    @classmethod
    def origin(cls, algebra, n: int, u: float = 0.0) -> "HalfSpacePoint":
        return CarnotPoint.origin(algebra, n).at_height(u)

    def to_chart(self) -> np.ndarray:
        return to_chart(self.xi, self.v)

    def __getitem__(self, idx) -> "HalfSpacePoint":
        shape = self.batch_shape
        xi = np.broadcast_to(self.xi, shape + self.xi.shape[-2:])
        v = np.broadcast_to(self.v, shape + self.v.shape[-1:])
        u = np.broadcast_to(self.u, shape)
        return HalfSpacePoint(xi[idx], v[idx], u[idx])

    def __repr__(self):
        return f"HalfSpacePoint(xi={self.xi.tolist()}, v={self.v.tolist()}, u={self.u.tolist()})"


Point = CarnotPoint | HalfSpacePoint


def as_halfspace(p: Point) -> HalfSpacePoint:
    if isinstance(p, HalfSpacePoint):
        return p
    return p.at_height(0.0)


def _like(template: Point, xi, v, u=None) -> Point:
    if isinstance(template, HalfSpacePoint):
        return HalfSpacePoint(xi, v, u if u is not None else template.u)
    return CarnotPoint(xi, v)


def _check_compatible(a: Point, b: Point):
    if a.xi.shape[-2:] != b.xi.shape[-2:]:
        raise ValueError(
            f"dimension mismatch: {a.algebra.name}^{a.n - 1} vs {b.algebra.name}^{b.n - 1}"
        )


def chart_dim(algebra, n: int) -> int:
    """Real dimension of the Carnot group F^{n-1} x Im F."""
    a = Algebra.parse(algebra)
    return (n - 1) * a.dim + a.im_dim


def to_chart(xi, v) -> np.ndarray:
    """Flatten (xi, v) to exponential coordinates ``(Re xi_1, ..., v)``."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(xi.shape[:-2], v.shape[:-1])
    flat = np.broadcast_to(xi, shape + xi.shape[-2:]).reshape(shape + (-1,))
    return np.concatenate([flat, np.broadcast_to(v, shape + v.shape[-1:])], axis=-1)


def from_chart(x, algebra: Algebra, n: int):
    x = np.asarray(x, dtype=float)
    m = (n - 1) * algebra.dim
    if x.shape[-1] != m + algebra.im_dim:
        raise ValueError(f"chart point needs {m + algebra.im_dim} coordinates, got {x.shape[-1]}")
    xi = x[..., :m].reshape(x.shape[:-1] + (n - 1, algebra.dim))
    return xi, x[..., m:]


def im_hermitian(xi, eta) -> np.ndarray:
    """``Im <xi, eta>`` as imaginary components."""
    return alg.im(alg.hermitian(xi, eta))


# -- group operations -----------------------------------------------------


def group_mul(a: CarnotPoint, b: CarnotPoint) -> CarnotPoint:
    _check_compatible(a, b)
    return CarnotPoint(a.xi + b.xi, a.v + b.v + 2.0 * im_hermitian(a.xi, b.xi))


def group_inv(a: Point) -> Point:
    return _like(a, -a.xi, -a.v)


def translate(g: CarnotPoint, p: Point) -> Point:
    """Left Carnot translation ``T_g``; the height ``u`` is untouched."""
    _check_compatible(g, p)
    return _like(p, g.xi + p.xi, g.v + p.v + 2.0 * im_hermitian(g.xi, p.xi))


def _lam_coords(lam, k: int) -> np.ndarray:
    if isinstance(lam, Scalar):
        if lam.algebra.dim != k:
            raise ValueError(f"algebra mismatch: dilation by {lam.algebra.name} scalar")
        return lam.coords
    lam = np.asarray(lam, dtype=float)
    if lam.shape == () or lam.shape[-1:] != (k,):
        return alg.from_parts(lam, np.zeros(lam.shape + (k - 1,)))
    return lam


def dilate(lam, p: Point) -> Point:
    """Carnot dilation ``(xi, v, u) -> (lam xi, lam v conj(lam), |lam|^2 u)``.

    For commuting algebras ``lam v conj(lam) = |lam|^2 v``.  Over H the
    conjugation form is required for the map to be a group automorphism.
    """
    k = p.xi.shape[-1]
    lam = _lam_coords(lam, k)
    n2 = alg.abs2(lam)
    if np.any(n2 == 0):
        raise ValueError("dilation by zero")
    xi = alg.scalar_times_vector(lam, p.xi)
    if k == 1:
        v = p.v * n2[..., None]
    else:
        vs = alg.from_parts(np.zeros(p.v.shape[:-1]), p.v)
        v = alg.im(alg.mul(alg.mul(lam, vs), alg.conj(lam)))
    if isinstance(p, HalfSpacePoint):
        return HalfSpacePoint(xi, v, n2 * p.u)
    return CarnotPoint(xi, v)


def _quarter_power(real, imag) -> np.ndarray:
    return np.sqrt(np.sqrt(real * real + np.einsum("...i,...i->...", imag, imag)))


def kc_norm(p: Point) -> np.ndarray:
    """Koranyi-Cygan gauge ``| |xi|^2 + u - v |^(1/2)``."""
    u = p.u if isinstance(p, HalfSpacePoint) else 0.0
    return _quarter_power(alg.vec_abs2(p.xi) + u, p.v)


def kc_dist(p: Point, q: Point) -> np.ndarray:
    """Koranyi-Cygan distance, extended to distinct heights by ``|u - u'|``."""
    _check_compatible(p, q)
    pu = p.u if isinstance(p, HalfSpacePoint) else 0.0
    qu = q.u if isinstance(q, HalfSpacePoint) else 0.0
    real = alg.vec_abs2(p.xi - q.xi) + np.abs(pu - qu)
    imag = p.v - q.v + 2.0 * im_hermitian(p.xi, q.xi)
    return _quarter_power(real, imag)


# -- sampling -------------------------------------------------------------


def random_carnot(algebra, n: int, size, rng: np.random.Generator, scale: float = 1.0) -> CarnotPoint:
    a = Algebra.parse(algebra)
    size = (size,) if isinstance(size, int) else tuple(size)
    xi = scale * rng.standard_normal(size + (n - 1, a.dim))
    v = scale * scale * rng.standard_normal(size + (a.im_dim,))
    return CarnotPoint(xi, v)


def random_halfspace(algebra, n: int, size, rng: np.random.Generator, scale: float = 1.0) -> HalfSpacePoint:
    c = random_carnot(algebra, n, size, rng, scale)
    u = scale * scale * rng.exponential(size=c.batch_shape)
    return c.at_height(u)


def _flat(p: Point) -> np.ndarray:
    h = as_halfspace(p)
    shape = h.batch_shape
    return np.concatenate([to_chart(h.xi, h.v), np.broadcast_to(h.u, shape)[..., None]], axis=-1)


def max_deviation(p: Point, q: Point) -> float:
    """Largest relative coordinate discrepancy between matching entries.

    Coordinates rather than ``kc_dist``: the gauge is only 1/2-Holder in the
    vertical direction, so a rounding error of 1e-16 in ``v`` already reads
    as 1e-8 in ``kc_dist``.
    """
    a, b = _flat(p), _flat(q)
    scale = 1.0 + np.maximum(np.max(np.abs(a), axis=-1), np.max(np.abs(b), axis=-1))
    dev = np.max(np.abs(a - b), axis=-1) / scale
    return float(np.max(dev)) if dev.size else 0.0
