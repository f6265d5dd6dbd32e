"""Kleinian groups from packings: words, polyhedron, deformation and witnesses."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilcarpet.carnot import HalfSpacePoint, kc_dist, max_deviation
from nilcarpet.carpet import CarpetSpec, removed_cells
from nilcarpet.groups import (
    NoQualifyingPair,
    ReductionFailed,
    Word,
    apply_word,
    base_point,
    boundary_triviality_check,
    build_group,
    deform,
    equivariance_check,
    free_relation_check,
    in_column,
    in_polyhedron,
    klein_check,
    limit_set_proxy,
    nontriviality_witness,
    orbit_disjointness_check,
    pair_length,
    qualifying_pair,
    random_word,
    reduce,
)
from nilcarpet.packing import Packing, exclude, pack
from nilcarpet.stretch import StretchMap


def setup(k, D, a="R", n=3, d=0, excluded=()):
    dim = {"R": n - 1, "C": 2 * (n - 1) + 1, "H": 4 * (n - 1) + 3}[a]
    spec = CarpetSpec(dim, k, D)
    cells = removed_cells(spec)
    p = exclude(pack(spec, a, n, d, cells), list(excluded))
    return spec, cells, p, build_group(spec, p, cells)


def deformed(spec, cells, grp, t):
    return deform(grp, StretchMap.from_carpet(spec, t), cells)


def closed_form_length(grp, i, j):
    """Real case: two disjoint round balls, translation length of the product of their inversions."""
    ci, cj = grp.ball_centers[i], grp.ball_centers[j]
    ri, rj = grp.ball_radii[i], grp.ball_radii[j]
    delta = math.dist(ci, cj)
    # doubled for the curvature -1/4 normalisation
    return 4.0 * math.acosh((delta ** 2 - ri ** 2 - rj ** 2) / (2 * ri * rj))


@pytest.fixture(scope="module")
def one_cell():
    return setup((3,), 1)


@pytest.fixture(scope="module")
def two_level():
    return setup((3, 9), 2)


class TestWord:
    def test_free_reduction(self):
        assert len(Word([("H", 0), ("H", 0)])) == 0
        assert Word([("E", 0, 2), ("E", 0, -1)]).letters == (("E", 0, 1),)
        assert len(Word([("E", 1, 1), ("E", 1, -1), ("H", 2)])) == 1

    def test_inverse(self):
        w = Word([("E", 0, 1), ("H", 3), ("Z", 1, 2)])
        assert len(w + w.inverse()) == 0
        assert w.inverse().letters == (("Z", 1, -2), ("H", 3), ("E", 0, -1))

    def test_bad_letter(self):
        with pytest.raises(ValueError):
            Word([("Q", 0)])

    def test_repr(self):
        assert repr(Word([("H", 1), ("E", 0, -1)])) == "Word(I1 E0^-1)"


class TestBuild:
    def test_counts(self, one_cell):
        _, _, _, grp = one_cell
        assert len(grp.generators_E) == 2
        assert len(grp.generators_H) == 1
        assert grp.central == () and grp.v_period == 0.0
        assert grp.limit_set_full

    def test_exclusion(self):
        spec, cells, p, grp = setup((3, 9), 2, excluded=(0,))
        assert len(grp.generators_H) == len(p) - 1
        assert not grp.limit_set_full
        assert grp.to_record()["excluded"] == [0]
        _, _, _, empty = setup((3,), 1, excluded=(0,))
        assert len(empty.generators_H) == 0

    def test_heisenberg_lattice(self):
        _, _, _, grp = setup((3,), 1, a="C", n=2)
        assert len(grp.steps) == 2
        (z,) = grp.central
        np.testing.assert_array_equal(z.xi, np.zeros((1, 2)))
        assert z.v[0] == 4.0
        assert grp.v_period == 4.0

    def test_mismatch(self, one_cell):
        spec, cells, p, _ = one_cell
        with pytest.raises(ValueError):
            build_group(CarpetSpec(3, (3,), 1), p, cells)

    def test_overlap_rejected(self):
        spec = CarpetSpec(2, (3,), 1)
        bad = Packing("R", 3, np.array([[0.0, 0.0], [0.1, 0.0]]), np.array([0.1, 0.1]), np.zeros(2, dtype=int))
        with pytest.raises(ValueError):
            build_group(spec, bad)
        assert len(build_group(spec, bad, check_disjoint=False).ball_radii) == 2


class TestEvaluation:
    def test_apply_word_examples(self, one_cell):
        _, _, _, grp = one_cell
        p = HalfSpacePoint(np.array([[0.375], [0.25]]), np.zeros(0), 0.5)
        assert apply_word(grp, Word(), p) is p
        back = grp.letter(("E", 0, -1))(grp.letter(("E", 0, 1))(p))
        np.testing.assert_array_equal(back.xi, p.xi)
        twice = grp.letter(("H", 0))(grp.letter(("H", 0))(p))
        assert max_deviation(twice, p) < 1e-12

    def test_polyhedron_examples(self, one_cell):
        _, _, _, grp = one_cell
        hp = lambda x1, x2, u: HalfSpacePoint(np.array([[x1], [x2]]), np.zeros(0), u)
        assert in_polyhedron(grp, hp(0.0, 0.0, 10.0))
        assert not in_polyhedron(grp, hp(0.0, 0.0, 0.0))
        assert not in_polyhedron(grp, hp(0.7, 0.0, 1.0))
        assert in_polyhedron(grp, hp(0.4, 0.4, 0.0))
        assert in_column(grp, hp(0.5, -0.5, 0.0))
        assert not in_column(grp, hp(0.5, -0.5, 0.0), open_=True)

    def test_reduce_fixed_point(self, one_cell):
        _, _, _, grp = one_cell
        p = HalfSpacePoint(np.array([[0.2], [0.1]]), np.zeros(0), 5.0)
        w, q = reduce(grp, p)
        assert len(w) == 0 and q is p

    def test_reduce_needs_single_point(self, one_cell):
        _, _, _, grp = one_cell
        p = HalfSpacePoint(np.zeros((2, 2, 1)), np.zeros((2, 0)), np.ones(2))
        with pytest.raises(ValueError):
            reduce(grp, p)
        with pytest.raises(ValueError):
            reduce(grp, p[0], max_steps=0)

    def test_reduce_gives_up(self, two_level):
        _, _, _, grp = two_level
        deep = HalfSpacePoint(np.array([[40.3], [-17.2]]), np.zeros(0), 1e-3)
        with pytest.raises(ReductionFailed):
            reduce(grp, deep, max_steps=1)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-4, 2.0))
    def test_reduce_round_trip(self, x1, x2, u):
        _, _, _, grp = setup((3, 9), 2)
        p = HalfSpacePoint(np.array([[x1], [x2]]), np.zeros(0), u)
        w, q = reduce(grp, p)
        assert in_polyhedron(grp, q)
        assert max_deviation(apply_word(grp, w, q), p) < 1e-9

    def test_reduce_heisenberg(self):
        _, _, _, grp = setup((3,), 1, a="C", n=2)
        p = HalfSpacePoint(np.array([[0.1, 0.2]]), np.array([9.5]), 0.3)
        w, q = reduce(grp, p)
        assert w.letters == (("Z", 1, 2),)
        assert q.v[0] == 1.5
        assert in_polyhedron(grp, q)
        assert max_deviation(apply_word(grp, w, q), p) < 1e-12

    def test_base_point(self, two_level):
        _, _, _, grp = two_level
        assert in_polyhedron(grp, base_point(grp))


class TestDeform:
    def test_identity(self, two_level):
        spec, cells, _, grp = two_level
        d = deformed(spec, cells, grp, 1.0)
        np.testing.assert_array_equal(d.group.ball_centers, grp.ball_centers)
        np.testing.assert_array_equal(d.shifts, 0.0)
        assert d.group.steps[0].xi[0, 0] == 1.0

    def test_first_step_is_t1(self, one_cell):
        spec, cells, _, grp = one_cell
        d = deformed(spec, cells, grp, 2.0)
        assert d.group.steps[0].xi[0, 0] == pytest.approx(5 / 3, abs=1e-14)
        assert d.group.steps[1].xi[1, 0] == 1.0
        assert d.shifts[0] == 0.0
        assert d.group.col_hi[0] - d.group.col_lo[0] == pytest.approx(5 / 3, abs=1e-14)

    def test_off_center_balls_move_with_their_cell(self, two_level):
        spec, cells, _, grp = two_level
        d = deformed(spec, cells, grp, 2.0)
        np.testing.assert_allclose(d.group.ball_centers[:, 0] - grp.ball_centers[:, 0], d.shifts, atol=1e-15)
        np.testing.assert_array_equal(d.group.ball_radii, grp.ball_radii)
        assert np.any(d.shifts != 0)

    def test_stretch_must_match(self, two_level):
        spec, cells, _, grp = two_level
        with pytest.raises(ValueError):
            deform(grp, StretchMap.from_carpet(CarpetSpec(2, (3,), 1), 2.0), cells)


class TestKlein:
    def test_default_real(self, two_level):
        _, _, _, grp = two_level
        rep = klein_check(grp, 1000, 0)
        assert rep.ok, rep.failures
        assert rep.cases > 1000 and rep.details["min_ball_margin"] > 0

    @pytest.mark.parametrize("a,n,k", [("C", 2, (3, 5)), ("H", 2, (3,))])
    def test_non_real(self, a, n, k):
        _, _, _, grp = setup(k, len(k), a=a, n=n)
        assert klein_check(grp, 300, 1).ok

    def test_deformed(self, two_level):
        spec, cells, _, grp = two_level
        for t in (0.5, 2.0):
            assert klein_check(deformed(spec, cells, grp, t), 500, 2).ok

    def test_overlapping_balls_fail(self):
        spec = CarpetSpec(2, (3,), 1)
        bad = Packing("R", 3, np.array([[0.0, 0.0], [0.1, 0.0]]), np.array([0.1, 0.1]), np.zeros(2, dtype=int))
        rep = klein_check(build_group(spec, bad, check_disjoint=False), 300, 0)
        assert not rep.ok
        assert any(f["check"] == "generator balls overlap" for f in rep.failures)

    def test_deterministic(self, two_level):
        _, _, _, grp = two_level
        assert klein_check(grp, 300, 5).to_record() == klein_check(grp, 300, 5).to_record()


class TestEquivariance:
    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_real(self, two_level, t):
        spec, cells, _, grp = two_level
        rep = equivariance_check(grp, deformed(spec, cells, grp, t), 1000, 0)
        assert rep.ok, rep.failures
        assert rep.max_deviation <= 1e-9

    def test_identity_is_exact(self, two_level):
        spec, cells, _, grp = two_level
        assert equivariance_check(grp, deformed(spec, cells, grp, 1.0), 500, 3).max_deviation == 0.0

    def test_heisenberg_lattice_step_not_equivariant(self):
        # the stretched step shifts v by 2 psi(x1) instead of 2 x1 (recorded limitation)
        spec, cells, _, grp = setup((3,), 1, a="C", n=2)
        rep = equivariance_check(grp, deformed(spec, cells, grp, 2.0), 200, 0)
        assert any(f["check"] == "lattice generator" for f in rep.failures)


class TestRelations:
    def test_free(self, two_level):
        _, _, _, grp = two_level
        rep = free_relation_check(grp, 30, 0)
        assert rep.ok, rep.failures
        assert rep.details["smallest_move"] > 1e-6

    def test_orbits_disjoint(self, two_level):
        _, _, _, grp = two_level
        rep = orbit_disjointness_check(grp, 100, 200, 0)
        assert rep.ok and rep.cases > 0

    def test_random_words_are_reduced(self, two_level):
        _, _, _, grp = two_level
        rng = np.random.default_rng(0)
        for length in range(1, 7):
            w = random_word(grp, length, rng)
            assert len(w) == length and Word(w.letters) == w


class TestWitness:
    def test_pair_rule(self, two_level):
        spec, cells, _, grp = two_level
        (i, j), (ci, cj) = qualifying_pair(deformed(spec, cells, grp, 1.0))
        assert i < j and ci != cj

    def test_no_pair_at_one_level(self, one_cell):
        spec, cells, _, grp = one_cell
        with pytest.raises(NoQualifyingPair):
            qualifying_pair(deformed(spec, cells, grp, 2.0))

    @pytest.mark.parametrize("t", [1.0, 2.0])
    def test_length_matches_closed_form(self, two_level, t):
        spec, cells, _, grp = two_level
        d = deformed(spec, cells, grp, t)
        (i, j), _ = qualifying_pair(d)
        ell = pair_length(d.group, i, j)
        assert abs(ell.refined - closed_form_length(d.group, i, j)) <= 3 * ell.error + 1e-9

    def test_nontrivial(self, two_level):
        spec, cells, _, grp = two_level
        rep = nontriviality_witness(deformed(spec, cells, grp, 1.0), deformed(spec, cells, grp, 2.0))
        assert rep.nontrivial
        assert rep.difference > 1.0

    def test_control(self, two_level):
        spec, cells, _, grp = two_level
        rep = nontriviality_witness(deformed(spec, cells, grp, 2.0), deformed(spec, cells, grp, 2.0))
        assert rep.difference <= rep.error and not rep.nontrivial

    def test_symmetric(self, two_level):
        spec, cells, _, grp = two_level
        a, b = deformed(spec, cells, grp, 1.0), deformed(spec, cells, grp, 2.0)
        ab, ba = nontriviality_witness(a, b), nontriviality_witness(b, a)
        assert ab.pair == ba.pair
        assert ab.difference == pytest.approx(ba.difference, rel=1e-3)


class TestBoundary:
    def test_central_excluded(self):
        spec, cells, p, grp = setup((3,), 1, excluded=(0,))
        rep = boundary_triviality_check(grp, deformed(spec, cells, grp, 2.0), p, cells, 1000, 0)
        assert rep.ok, rep.failures
        assert rep.details["translations"][0]["c"] == 0.0

    def test_off_center_excluded(self, two_level):
        spec, cells, p0, _ = two_level
        b = next(i for i in range(len(p0)) if cells.center[p0.cell[i], 0] < 0)
        spec, cells, p, grp = setup((3, 9), 2, excluded=(b,))
        rep = boundary_triviality_check(grp, deformed(spec, cells, grp, 2.0), p, cells, 1000, 0)
        assert rep.ok, rep.failures
        assert rep.details["translations"][0]["c"] < 0
        assert rep.details["translations"][0]["deviation"] == 0.0
        lo, hi = rep.details["slope_on_carpet"]
        assert lo == pytest.approx(2.0, rel=1e-6) and hi == pytest.approx(2.0, rel=1e-6)
        lo, hi = rep.details["slope_in_gap"]
        assert lo == pytest.approx(1.0, abs=1e-6) and hi == pytest.approx(1.0, abs=1e-6)

    def test_nothing_excluded(self, two_level):
        spec, cells, p, grp = two_level
        rep = boundary_triviality_check(grp, deformed(spec, cells, grp, 2.0), p, cells, 100, 0)
        assert not rep.ok

    def test_group_packing_mismatch(self, two_level):
        spec, cells, p, grp = two_level
        with pytest.raises(ValueError):
            boundary_triviality_check(grp, deformed(spec, cells, grp, 2.0), exclude(p, [0]), cells, 100, 0)


class TestBallIndex:
    @pytest.mark.parametrize("a,n,k", [("R", 3, (3, 9, 27)), ("C", 2, (3, 5))])
    def test_matches_brute_force(self, a, n, k):
        _, _, _, grp = setup(k, len(k), a=a, n=n)
        rng = np.random.default_rng(0)
        m = grp.ball_centers.shape[1]
        x = rng.uniform(-0.5, 0.5, size=(3000, m))
        nh = m - grp.algebra.im_dim
        p = HalfSpacePoint(x[:, :nh].reshape(3000, n - 1, grp.algebra.dim), x[:, nh:], np.zeros(3000))
        inside = ~in_polyhedron(grp, p)
        brute = np.zeros(3000, dtype=bool)
        for i in range(len(grp.ball_radii)):
            b = grp.ball(i)
            brute |= kc_dist(p, b.center) <= b.radius * (1 + 1e-12)
        np.testing.assert_array_equal(inside, brute)


def test_limit_set_proxy():
    r = limit_set_proxy(0.9, 0.5)
    assert r["removed_measure"] == pytest.approx(0.1)
    assert r["residual"] == pytest.approx(0.05)
