"""Arithmetic over the real division algebras R, C and H.

Elements are stored as float arrays whose trailing axis holds the real
components in the basis (1, i, j, k), truncated to the algebra's dimension.
The array kernels (``mul``, ``conj``, ``hermitian`` ...) broadcast over all
leading axes, which is what the geometry modules use.  ``Scalar``,
``ImScalar`` and ``FVector`` are thin value wrappers for single elements.

H-vectors are left modules: scalars multiply from the left and the
Hermitian product is ``<z, w> = sum z_i * conj(w_i)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Algebra(enum.Enum):
    R = 1
    C = 2
    H = 4

    @property
    def dim(self) -> int:
        return self.value

    @property
    def im_dim(self) -> int:
        return self.value - 1

    @classmethod
    def parse(cls, tag) -> "Algebra":
        if isinstance(tag, Algebra):
            return tag
        try:
            return cls[str(tag).upper()]
        except KeyError:
            raise ValueError(f"unknown algebra {tag!r}; expected one of R, C, H") from None

    @classmethod
    def from_dim(cls, k: int) -> "Algebra":
        for a in cls:
            if a.value == k:
                return a
        raise ValueError(f"no division algebra of real dimension {k}")


def _quaternion_table() -> np.ndarray:
    # e_a * e_b = sign * e_c for the basis (1, i, j, k)
    table = {
        (0, 0): (1, 0), (0, 1): (1, 1), (0, 2): (1, 2), (0, 3): (1, 3),
        (1, 0): (1, 1), (1, 1): (-1, 0), (1, 2): (1, 3), (1, 3): (-1, 2),
        (2, 0): (1, 2), (2, 1): (-1, 3), (2, 2): (-1, 0), (2, 3): (1, 1),
        (3, 0): (1, 3), (3, 1): (1, 2), (3, 2): (-1, 1), (3, 3): (-1, 0),
    }
    c = np.zeros((4, 4, 4))
    for (a, b), (s, out) in table.items():
        c[a, b, out] = s
    return c


_H_TABLE = _quaternion_table()
# C and R are the subalgebras spanned by (1, i) and (1,)
_TABLES = {k: np.ascontiguousarray(_H_TABLE[:k, :k, :k]) for k in (1, 2, 4)}
_CONJ_SIGNS = {k: np.array([1.0] + [-1.0] * (k - 1)) for k in (1, 2, 4)}


def _k(a: np.ndarray) -> int:
    k = a.shape[-1]
    if k not in _TABLES:
        raise ValueError(f"trailing axis of length {k} is not an algebra dimension")
    return k


def mul(a, b) -> np.ndarray:
    """Product ``a * b`` of algebra elements, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = _k(a)
    if b.shape[-1] != k:
        raise ValueError(f"algebra mismatch: dimension {k} times dimension {b.shape[-1]}")
    if k == 1:
        return a * b
    if k == 2:
        re = a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1]
        im = a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0]
        return np.stack(np.broadcast_arrays(re, im), axis=-1)
    return np.einsum("...i,...j,ijk->...k", a, b, _TABLES[4])


def conj(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a * _CONJ_SIGNS[_k(a)]


def re(a) -> np.ndarray:
    return np.asarray(a, dtype=float)[..., 0]


def im(a) -> np.ndarray:
    """Imaginary components (length k - 1 trailing axis)."""
    return np.asarray(a, dtype=float)[..., 1:]


def from_parts(real, imag) -> np.ndarray:
    """Assemble an element from its real part and imaginary components."""
    real = np.asarray(real, dtype=float)
    imag = np.asarray(imag, dtype=float)
    shape = np.broadcast_shapes(real.shape, imag.shape[:-1])
    return np.concatenate(
        [np.broadcast_to(real, shape)[..., None], np.broadcast_to(imag, shape + imag.shape[-1:])], axis=-1
    )


def abs2(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.einsum("...i,...i->...", a, a)


def norm(a) -> np.ndarray:
    return np.sqrt(abs2(a))


def inv(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n2 = abs2(a)
    if np.any(n2 == 0):
        raise ZeroDivisionError("inverse of zero algebra element")
    return conj(a) / n2[..., None]


def hermitian(z, w) -> np.ndarray:
    """``<z, w> = sum_i z_i conj(w_i)`` over the second-to-last axis."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape[-2] != w.shape[-2]:
        raise ValueError(f"length mismatch: {z.shape[-2]} vs {w.shape[-2]}")
    return mul(z, conj(w)).sum(axis=-2)


def vec_abs2(z) -> np.ndarray:
    """Squared norm ``<z, z>`` of F-vectors (real)."""
    z = np.asarray(z, dtype=float)
    return np.einsum("...ij,...ij->...", z, z)


def scalar_times_vector(lam, z) -> np.ndarray:
    """Left scalar multiplication ``lam * z`` on F-vectors."""
    lam = np.asarray(lam, dtype=float)
    return mul(lam[..., None, :], z)


def random_elements(algebra: Algebra, shape, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    return scale * rng.standard_normal(shape + (algebra.dim,))


# -- value wrappers -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Scalar:
    algebra: Algebra
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.shape != (self.algebra.dim,):
            raise ValueError(f"{self.algebra.name} scalar needs {self.algebra.dim} components, got {coords.shape[0]}")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    @classmethod
    def of(cls, algebra, *components) -> "Scalar":
        algebra = Algebra.parse(algebra)
        comps = list(components) + [0.0] * (algebra.dim - len(components))
        return cls(algebra, np.array(comps, dtype=float))

    @classmethod
    def from_complex(cls, z: complex) -> "Scalar":
        return cls(Algebra.C, np.array([z.real, z.imag]))

    def _check(self, other: "Scalar"):
        if not isinstance(other, Scalar):
            return NotImplemented
        if other.algebra is not self.algebra:
            raise ValueError(f"algebra mismatch: {self.algebra.name} vs {other.algebra.name}")
        return None

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scalar(self.algebra, self.coords * other)
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Scalar(self.algebra, mul(self.coords, other.coords))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Scalar(self.algebra, self.coords * other)
        return NotImplemented

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Scalar(self.algebra, self.coords + other.coords)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Scalar(self.algebra, self.coords - other.coords)

    def __neg__(self):
        return Scalar(self.algebra, -self.coords)

    def __truediv__(self, other):
        # a / b means a * b^{-1}
        if isinstance(other, (int, float)):
            return Scalar(self.algebra, self.coords / other)
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __eq__(self, other):
        return isinstance(other, Scalar) and other.algebra is self.algebra and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.algebra, self.coords.tobytes()))

    def __abs__(self) -> float:
        return float(norm(self.coords))

    def conj(self) -> "Scalar":
        return Scalar(self.algebra, conj(self.coords))

    def inverse(self) -> "Scalar":
        return Scalar(self.algebra, inv(self.coords))

    @property
    def real(self) -> float:
        return float(self.coords[0])

    @property
    def imag(self) -> "ImScalar":
        return ImScalar(self.algebra, self.coords[1:])

    def isclose(self, other: "Scalar", tol: float = 1e-12) -> bool:
        return other.algebra is self.algebra and float(np.max(np.abs(self.coords - other.coords))) <= tol

    def __repr__(self):
        names = ("", "i", "j", "k")
        parts = [f"{c:g}{n}" for c, n in zip(self.coords, names)]
        return f"Scalar[{self.algebra.name}]({' + '.join(parts)})"


@dataclass(frozen=True, eq=False)
class ImScalar:
    algebra: Algebra
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.shape != (self.algebra.im_dim,):
            raise ValueError(
                f"Im {self.algebra.name} needs {self.algebra.im_dim} components, got {coords.shape[0]}"
            )
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    def as_scalar(self) -> Scalar:
        return Scalar(self.algebra, np.concatenate([[0.0], self.coords]))

    def conj(self) -> "ImScalar":
        return ImScalar(self.algebra, -self.coords)

    def __add__(self, other: "ImScalar") -> "ImScalar":
        return ImScalar(self.algebra, self.coords + other.coords)

    def __neg__(self) -> "ImScalar":
        return ImScalar(self.algebra, -self.coords)

    def __eq__(self, other):
        return isinstance(other, ImScalar) and other.algebra is self.algebra and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.algebra, self.coords.tobytes()))


@dataclass(frozen=True, eq=False)
class FVector:
    algebra: Algebra
    entries: np.ndarray  # shape (m, k)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim == 1:
            entries = entries.reshape(-1, self.algebra.dim)
        if entries.ndim != 2 or entries.shape[1] != self.algebra.dim:
            raise ValueError(f"FVector entries must have shape (m, {self.algebra.dim})")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, *scalars: Scalar) -> "FVector":
        if not scalars:
            raise ValueError("empty FVector")
        alg = scalars[0].algebra
        if any(s.algebra is not alg for s in scalars):
            raise ValueError("FVector entries must share an algebra")
        return cls(alg, np.stack([s.coords for s in scalars]))

    def __len__(self):
        return self.entries.shape[0]

    def __getitem__(self, i) -> Scalar:
        return Scalar(self.algebra, self.entries[i])

    def scale(self, lam: Scalar) -> "FVector":
        return FVector(self.algebra, scalar_times_vector(lam.coords, self.entries))


def conj_im(a: Scalar) -> tuple[Scalar, ImScalar]:
    """Return ``(conj(a), Im(a))`` with ``Im(a) = (a - conj(a)) / 2``."""
    return a.conj(), ImScalar(a.algebra, ((a.coords - conj(a.coords)) / 2)[1:])


def hermitian_product(z: FVector, w: FVector) -> Scalar:
    if z.algebra is not w.algebra:
        raise ValueError(f"algebra mismatch: {z.algebra.name} vs {w.algebra.name}")
    if len(z) != len(w):
        raise ValueError(f"length mismatch: {len(z)} vs {len(w)}")
    return Scalar(z.algebra, hermitian(z.entries, w.entries))
