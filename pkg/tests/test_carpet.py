"""Fat carpet construction: cells, membership, measures and the projected gap set."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilcarpet.carpet import (
    CarpetSpec,
    CellId,
    EnumerationCapExceeded,
    box_count_dimension,
    carpet_record,
    cell_interval,
    contains,
    delta1_measure_exact,
    measure_exact,
    measure_mc,
    project_delta1,
    removed_cells,
)

specs = st.builds(
    CarpetSpec,
    st.integers(1, 3),
    st.sampled_from([(3, 5, 7), (3, 9, 27), (3, 3, 3), (5, 7, 9), (3, 7, 11)]),
    st.integers(1, 3),
)


def digit_gap_oracle(spec, x):
    """Membership in the projected gap set from base-k digits (dim >= 2: every column survives)."""
    out = np.zeros(len(x), dtype=bool)
    y = np.asarray(x, dtype=float) + 0.5
    for k in spec.levels:
        s = y * k
        idx = np.floor(s)
        out |= idx == (k - 1) // 2
        y = s - idx
    return out


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            CarpetSpec(2, (4,), 1)
        with pytest.raises(ValueError):
            CarpetSpec(2, (3,), 2)
        with pytest.raises(ValueError):
            CarpetSpec(2, (9, 3), 2)
        with pytest.raises(ValueError):
            CarpetSpec(0, (3,), 1)

    def test_constructors(self):
        assert CarpetSpec.geometric(2, 3, 3).k_seq == (3, 9, 27)
        assert CarpetSpec.constant(2, 5, 2).k_seq == (5, 5)

    def test_removed_count_formula(self):
        spec = CarpetSpec(2, (3, 9, 27), 3)
        assert spec.removed_count() == 1 + 8 + 8 * 80
        assert len(removed_cells(spec)) == spec.removed_count()


class TestRemovedCells:
    def test_single_cell(self):
        cells = removed_cells(CarpetSpec(2, (3,), 1))
        assert len(cells) == 1
        cid, box = cells[0]
        np.testing.assert_array_equal(box.center, [0, 0])
        np.testing.assert_array_equal(box.half_width, [1 / 6, 1 / 6])
        assert cid == CellId(((1, 1),))

    def test_two_levels(self):
        cells = removed_cells(CarpetSpec(2, (3, 9), 2))
        assert len(cells) == 9
        assert sorted(cells.level.tolist()) == [1] + [2] * 8

    def test_depth_zero(self):
        with pytest.raises(ValueError):
            removed_cells(CarpetSpec(2, (3,), 0))

    def test_cap(self):
        with pytest.raises(EnumerationCapExceeded):
            removed_cells(CarpetSpec(2, (3, 9, 27), 3, cap=100))

    def test_addresses_end_central(self):
        spec = CarpetSpec(3, (3, 5), 2)
        cells = removed_cells(spec)
        for i in range(len(cells)):
            cid = cells.cell_id(i)
            k = spec.levels[cid.level - 1]
            assert cid.address[-1] == ((k - 1) // 2,) * 3
            assert all(d != ((kk - 1) // 2,) * 3 for d, kk in zip(cid.address[:-1], spec.levels))

    def test_interval_matches_address(self):
        spec = CarpetSpec(2, (3, 9), 2)
        cells = removed_cells(spec)
        for i in range(len(cells)):
            assert cells.interval(i) == cell_interval(spec, cells.cell_id(i))
            lo, hi = cells.interval(i)
            c, hw = cells.center[i, 0], cells.half_width[i]
            assert float(lo) == pytest.approx(c - hw, abs=1e-15)
            assert float(hi) == pytest.approx(c + hw, abs=1e-15)

    def test_cells_pairwise_disjoint(self):
        cells = removed_cells(CarpetSpec(2, (3, 5, 7), 3))
        gap = np.abs(cells.center[:, None, :] - cells.center[None, :, :]) - (
            cells.half_width[:, None, None] + cells.half_width[None, :, None])
        sep = np.max(gap, axis=-1)
        np.fill_diagonal(sep, 1.0)
        assert np.all(sep >= -1e-15)

    def test_cell_interval_errors(self):
        spec = CarpetSpec(2, (3,), 1)
        with pytest.raises(ValueError):
            cell_interval(spec, CellId(((1, 1), (4, 4))))
        with pytest.raises(ValueError):
            cell_interval(spec, CellId(((3, 1),)))


class TestContains:
    def test_examples(self):
        spec = CarpetSpec(2, (3, 9), 2)
        assert not contains(spec, [0.0, 0.0])
        for D in (1, 2):
            assert contains(CarpetSpec(2, (3, 9), D), [0.5, 0.5])
        # center of a level-2 removed cell
        x = removed_cells(spec).center[1]
        assert not contains(spec, x)
        assert contains(CarpetSpec(2, (3, 9), 1), x)

    def test_outside_cube(self):
        with pytest.raises(ValueError):
            contains(CarpetSpec(2, (3,), 1), [0.6, 0.0])
        with pytest.raises(ValueError):
            contains(CarpetSpec(2, (3,), 1), [0.1, 0.0, 0.0])

    @pytest.mark.parametrize("spec", [CarpetSpec(2, (3, 9), 2), CarpetSpec(3, (3, 5, 7), 3), CarpetSpec(2, (3, 3, 3), 3)])
    def test_matches_enumeration(self, spec):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.5, 0.5, size=(10_000, spec.dim))
        cells = removed_cells(spec)
        np.testing.assert_array_equal(contains(spec, x), cells.locate(x) < 0)

    @settings(max_examples=30, deadline=None)
    @given(specs, st.integers(0, 2**31 - 1))
    def test_symmetric(self, spec, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-0.5, 0.5, size=(500, spec.dim))
        inside = contains(spec, x)
        np.testing.assert_array_equal(contains(spec, -x), inside)
        np.testing.assert_array_equal(contains(spec, x[:, ::-1]), inside)

    @settings(max_examples=20, deadline=None)
    @given(specs, st.integers(0, 2**31 - 1))
    def test_monotone_in_depth(self, spec, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-0.5, 0.5, size=(500, spec.dim))
        deeper = CarpetSpec(spec.dim, spec.k_seq, min(spec.depth + 1, len(spec.k_seq)))
        assert np.all(contains(spec, x) >= contains(deeper, x))


class TestMeasure:
    def test_examples(self):
        assert measure_exact(CarpetSpec(2, (3,), 1)) == pytest.approx(8 / 9, rel=1e-15)
        assert measure_exact(CarpetSpec(2, (3, 9), 2)) == pytest.approx(640 / 729, rel=1e-15)

    @settings(max_examples=30)
    @given(specs)
    def test_product_matches_fraction_oracle(self, spec):
        exact = math.prod(1 - Fraction(1, k ** spec.dim) for k in spec.levels)
        assert measure_exact(spec) == pytest.approx(float(exact), rel=1e-14)

    @settings(max_examples=15)
    @given(specs)
    def test_measure_is_one_minus_removed_volume(self, spec):
        if spec.removed_count() > 20_000:
            return
        cells = removed_cells(spec)
        removed = math.fsum((2 * cells.half_width) ** spec.dim)
        assert measure_exact(spec) == pytest.approx(1 - removed, abs=1e-13)

    def test_classical_carpet_vanishes(self):
        values = [measure_exact(CarpetSpec.constant(2, 3, D)) for D in (1, 10, 40)]
        assert values[0] > values[1] > values[2]
        assert values[2] < 0.01

    def test_fat_carpet_stays_positive(self):
        values = [measure_exact(CarpetSpec.geometric(2, 3, D)) for D in range(1, 7)]
        assert min(values) >= 0.8765
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_monte_carlo_example(self):
        spec = CarpetSpec(2, (3,), 1)
        est, se = measure_mc(spec, 100_000, 0)
        assert abs(est - 8 / 9) <= 3 * se

    def test_monte_carlo_deterministic(self):
        spec = CarpetSpec(2, (3, 9), 2)
        assert measure_mc(spec, 100_000, 7) == measure_mc(spec, 100_000, 7)
        assert measure_mc(spec, 100_000, 7) != measure_mc(spec, 100_000, 8)

    def test_monte_carlo_depth_zero(self):
        assert measure_mc(CarpetSpec(2, (3,), 0), 1000, 0) == (1.0, 0.0)

    def test_monte_carlo_minimum_samples(self):
        with pytest.raises(ValueError):
            measure_mc(CarpetSpec(2, (3,), 1), 999, 0)

    def test_box_count_dimension(self):
        slope, counts = box_count_dimension(CarpetSpec.constant(2, 3, 6), 1458, [2, 6, 18, 54, 162])
        assert abs(slope - math.log(8) / math.log(3)) < 0.05
        # a grid of 3^j boxes per axis (j <= depth) meets exactly 8^j occupied boxes
        assert counts[::-1] == [8 ** j for j in range(2, 7)]

    def test_box_count_needs_plane(self):
        with pytest.raises(ValueError):
            box_count_dimension(CarpetSpec(3, (3,), 1), 27, [3])


class TestGapProjection:
    def test_single_level(self):
        d1 = project_delta1(CarpetSpec(2, (3,), 1))
        assert d1._exact == [(Fraction(-1, 6), Fraction(1, 6))]
        assert d1.measure() == pytest.approx(1 / 3, rel=1e-15)

    def test_two_levels(self):
        d1 = project_delta1(CarpetSpec(2, (3, 9), 2))
        assert d1.measure() == pytest.approx(11 / 27, abs=1e-12)
        assert sum((hi - lo for lo, hi in d1._exact), Fraction(0)) == Fraction(11, 27)

    @settings(max_examples=30, deadline=None)
    @given(specs)
    def test_measure_formula(self, spec):
        d1 = project_delta1(spec)
        assert abs(d1.measure() - delta1_measure_exact(spec)) <= 1e-12

    @settings(max_examples=20, deadline=None)
    @given(specs)
    def test_fast_path_matches_enumeration(self, spec):
        if spec.removed_count() > 50_000:
            return
        fast = project_delta1(spec)
        slow = project_delta1(spec, removed_cells(spec))
        assert fast._exact == slow._exact

    @pytest.mark.parametrize("spec", [CarpetSpec(2, (3, 9, 27), 3), CarpetSpec(5, (3, 5), 2), CarpetSpec(2, (5, 7, 9), 3)])
    def test_matches_digit_oracle(self, spec):
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.5, 0.5, size=20_000)
        np.testing.assert_array_equal(project_delta1(spec).contains(x), digit_gap_oracle(spec, x))

    def test_one_dimensional_is_cantor_complement(self):
        spec = CarpetSpec(1, (3, 3), 2)
        d1 = project_delta1(spec)
        assert d1._exact == [(Fraction(-7, 18), Fraction(-5, 18)), (Fraction(-1, 6), Fraction(1, 6)),
                             (Fraction(5, 18), Fraction(7, 18))]

    def test_deep_geometric_without_enumeration(self):
        spec = CarpetSpec.geometric(2, 3, 5)
        d1 = project_delta1(spec)
        assert abs(d1.measure() - delta1_measure_exact(spec)) <= 1e-12
        assert 1 - d1.measure() > 0.56

    def test_record(self):
        spec = CarpetSpec(2, (3, 9), 2)
        rec = carpet_record(spec)
        assert rec["removed_cell_count"] == 9
        assert rec["cells"][0]["address"] == [[1, 1]]
        assert rec["measure_exact"] == measure_exact(spec)
