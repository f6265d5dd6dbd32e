"""Division-algebra arithmetic: defining relations, conjugation and the Hermitian product."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilcarpet import algebra as alg
from nilcarpet.algebra import Algebra, FVector, ImScalar, Scalar, conj_im, hermitian_product

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def quats(draw_list):
    return Scalar(Algebra.H, np.array(draw_list))


quat = st.lists(finite, min_size=4, max_size=4).map(quats)


def _naive_quaternion(a, b):
    """Hamilton product written out term by term."""
    a1, b1, c1, d1 = a
    a2, b2, c2, d2 = b
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


class TestAlgebraEnum:
    def test_dimensions(self):
        assert [a.dim for a in Algebra] == [1, 2, 4]
        assert [a.im_dim for a in Algebra] == [0, 1, 3]

    def test_parse(self):
        assert Algebra.parse("c") is Algebra.C
        assert Algebra.parse(Algebra.H) is Algebra.H
        with pytest.raises(ValueError):
            Algebra.parse("O")

    def test_from_dim(self):
        assert Algebra.from_dim(4) is Algebra.H
        with pytest.raises(ValueError):
            Algebra.from_dim(3)


class TestDefiningRelations:
    def test_complex_i_squared(self):
        i = Scalar.of("C", 0, 1)
        assert i * i == Scalar.of("C", -1, 0)

    def test_quaternion_ij(self):
        i, j, k = (Scalar.of("H", *e) for e in np.eye(4)[1:])
        assert i * j == k
        assert j * i == -k
        assert j * k == i
        assert k * i == j
        assert i * i == j * j == k * k == Scalar.of("H", -1)

    def test_complex_matches_python_complex(self):
        a, b = 3 - 2j, -1.5 + 4j
        got = Scalar.from_complex(a) * Scalar.from_complex(b)
        assert got.isclose(Scalar.from_complex(a * b), 1e-14)

    def test_real_product(self):
        assert Scalar.of("R", 3.0) * Scalar.of("R", -2.0) == Scalar.of("R", -6.0)

    def test_mixed_algebra_rejected(self):
        with pytest.raises(ValueError):
            Scalar.of("C", 1) * Scalar.of("H", 1)

    def test_wrong_component_count(self):
        with pytest.raises(ValueError):
            Scalar(Algebra.C, np.zeros(3))


class TestConjIm:
    def test_complex_example(self):
        c, im = conj_im(Scalar.of("C", 3, 4))
        assert c == Scalar.of("C", 3, -4)
        assert im == ImScalar(Algebra.C, [4.0])

    def test_real_example(self):
        c, im = conj_im(Scalar.of("R", 5))
        assert c == Scalar.of("R", 5)
        assert im.coords.shape == (0,)

    def test_quaternion_example(self):
        c, im = conj_im(Scalar.of("H", 1, 1, 1, 0))
        assert c == Scalar.of("H", 1, -1, -1, 0)
        assert im == ImScalar(Algebra.H, [1.0, 1.0, 0.0])


class TestHermitian:
    def test_complex_example(self):
        z = FVector.of(Scalar.of("C", 1), Scalar.of("C", 0, 1))
        w = FVector.of(Scalar.of("C", 0, 1), Scalar.of("C", 0))
        assert hermitian_product(z, w) == Scalar.of("C", 0, -1)

    def test_self_product_is_squared_norm(self):
        z = FVector.of(Scalar.of("R", 1), Scalar.of("R", 1))
        assert hermitian_product(z, z) == Scalar.of("R", 2)

    def test_quaternion_example(self):
        z = FVector.of(Scalar.of("H", 0, 1))
        w = FVector.of(Scalar.of("H", 0, 0, 1))
        assert hermitian_product(z, w) == Scalar.of("H", 0, 0, 0, -1)

    def test_length_mismatch(self):
        z = FVector.of(Scalar.of("C", 1))
        w = FVector.of(Scalar.of("C", 1), Scalar.of("C", 1))
        with pytest.raises(ValueError):
            hermitian_product(z, w)

    def test_algebra_mismatch(self):
        with pytest.raises(ValueError):
            hermitian_product(FVector.of(Scalar.of("C", 1)), FVector.of(Scalar.of("H", 1)))

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(1)
        for a in Algebra:
            z = alg.random_elements(a, (50, 3), rng)
            w = alg.random_elements(a, (50, 3), rng)
            np.testing.assert_allclose(alg.hermitian(z, w), alg.conj(alg.hermitian(w, z)), atol=1e-12)


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------


class TestQuaternionProperties:
    @given(quat, quat)
    def test_matches_hamilton_formula(self, a, b):
        np.testing.assert_allclose((a * b).coords, _naive_quaternion(a.coords, b.coords), atol=1e-10)

    @given(quat, quat, quat)
    def test_associative(self, a, b, c):
        np.testing.assert_allclose(((a * b) * c).coords, (a * (b * c)).coords, atol=1e-8)

    @given(quat, quat)
    def test_norm_multiplicative(self, a, b):
        assert abs(a * b) == pytest.approx(abs(a) * abs(b), rel=1e-12, abs=1e-12)

    @given(quat, quat)
    def test_conjugate_reverses_order(self, a, b):
        np.testing.assert_allclose((a * b).conj().coords, (b.conj() * a.conj()).coords, atol=1e-10)

    @given(quat)
    def test_inverse(self, a):
        if abs(a) < 1e-3:
            return
        np.testing.assert_allclose((a * a.inverse()).coords, [1, 0, 0, 0], atol=1e-12)
        np.testing.assert_allclose((a.inverse() * a).coords, [1, 0, 0, 0], atol=1e-12)

    def test_inverse_of_zero(self):
        with pytest.raises(ZeroDivisionError):
            Scalar.of("H").inverse()


class TestVectorProperties:
    @settings(max_examples=50)
    @given(st.integers(0, 2), st.integers(0, 2**31 - 1))
    def test_left_scaling_sesquilinear(self, ai, seed):
        a = list(Algebra)[ai]
        rng = np.random.default_rng(seed)
        z = alg.random_elements(a, 3, rng)
        w = alg.random_elements(a, 3, rng)
        lam = alg.random_elements(a, (), rng)
        lhs = alg.hermitian(alg.scalar_times_vector(lam, z), w)
        np.testing.assert_allclose(lhs, alg.mul(lam, alg.hermitian(z, w)), atol=1e-10)

    def test_vec_abs2_is_real_part_of_self_product(self):
        rng = np.random.default_rng(2)
        z = alg.random_elements(Algebra.H, (20, 4), rng)
        np.testing.assert_allclose(alg.vec_abs2(z), alg.hermitian(z, z)[..., 0], rtol=1e-13)
        np.testing.assert_allclose(alg.hermitian(z, z)[..., 1:], 0.0, atol=1e-12)
