"""Map-quality metrics and the Mann-Whitney U test."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elitemap.metrics import (
    EXACT_SIZE_LIMIT,
    compute_metrics,
    coverage,
    excluded_reference_cells,
    global_performance,
    global_reliability,
    mann_whitney_u,
    precision,
    reference_map,
)

nan = float("nan")


class TestReferenceMap:
    def test_cellwise_max_with_nan_gaps(self):
        m1 = np.array([[1.0, nan], [0.5, nan]])
        m2 = np.array([[0.5, 2.0], [nan, nan]])
        ref = reference_map([m1, m2])
        assert ref[0, 0] == 1.0
        assert ref[0, 1] == 2.0
        assert ref[1, 0] == 0.5
        assert np.isnan(ref[1, 1])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            reference_map([np.zeros((2, 2)), np.zeros((3, 2))])

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            reference_map([])


class TestMetricValues:
    """Hand-worked 2×2 example used across all four metrics.

    reference M = [[1.0, 2.0], [4.0, nan]]  (3 attainable cells)
    run m       = [[0.5, nan], [4.0, nan]]  (2 filled)
    """

    M = np.array([[1.0, 2.0], [4.0, nan]])
    m = np.array([[0.5, nan], [4.0, nan]])

    def test_coverage(self):
        assert coverage(self.m, self.M) == pytest.approx(2 / 3)

    def test_global_reliability_counts_misses_as_zero(self):
        want = (0.5 / 1.0 + 0.0 + 4.0 / 4.0) / 3
        assert global_reliability(self.m, self.M) == pytest.approx(want)

    def test_precision_averages_only_filled(self):
        want = (0.5 / 1.0 + 4.0 / 4.0) / 2
        assert precision(self.m, self.M) == pytest.approx(want)

    def test_global_performance(self):
        assert global_performance(self.m, self.M) == pytest.approx(4.0 / 4.0)

    def test_perfect_run_scores_one_everywhere(self):
        rec = compute_metrics("t", 0, self.M, self.M)
        assert rec.coverage == 1.0
        assert rec.global_reliability == pytest.approx(1.0)
        assert rec.precision == pytest.approx(1.0)
        assert rec.global_performance == pytest.approx(1.0)

    def test_empty_run_map(self):
        empty = np.full((2, 2), nan)
        rec = compute_metrics("t", 0, empty, self.M)
        assert rec.coverage == 0.0
        assert rec.global_reliability == 0.0
        assert rec.precision is None
        assert rec.global_performance is None

    def test_precision_never_below_reliability(self, rng):
        """Precision averages over a subset of reliability's cells, dropping
        only zeros — so it can never be the smaller of the two."""
        for _ in range(50):
            M = rng.random((5, 5)) + 0.1
            m = np.where(rng.random((5, 5)) < 0.6, rng.random((5, 5)) * M, nan)
            if not np.isfinite(m).any():
                continue
            assert precision(m, M) >= global_reliability(m, M) - 1e-12


class TestNonPositiveReferenceCells:
    M = np.array([[1.0, -2.0], [0.0, nan]])

    def test_excluded_count(self):
        assert excluded_reference_cells(self.M) == 2

    def test_reliability_ignores_them(self):
        m = np.array([[1.0, -1.0], [0.0, nan]])
        # only the M=1.0 cell is usable; m fills it at ratio 1.0
        assert global_reliability(m, self.M) == pytest.approx(1.0)
        assert precision(m, self.M) == pytest.approx(1.0)

    def test_coverage_still_counts_them(self):
        m = np.array([[nan, -1.0], [nan, nan]])
        assert coverage(m, self.M) == pytest.approx(1 / 3)

    def test_all_nonpositive_reference_raises(self):
        bad = np.array([[0.0, -1.0]])
        with pytest.raises(ValueError):
            global_reliability(np.array([[nan, nan]]), bad)


class TestMannWhitney:
    def test_worked_exact_example(self):
        """{1,2} vs {3,4}: U_a = 0, μ = 2.  Of the 6 equally likely
        arrangements only U ∈ {0, 4} lie 2 or more from the mean → p = 1/3."""
        u, p = mann_whitney_u([1, 2], [3, 4])
        assert u == 0.0
        assert p == pytest.approx(1 / 3)

    def test_identical_samples_p_one(self):
        _, p = mann_whitney_u([5, 5, 5], [5, 5, 5])
        assert p == pytest.approx(1.0)

    def test_u_complement_identity(self, rng):
        for _ in range(20):
            a = rng.random(6).tolist()
            b = rng.random(5).tolist()
            ua, _ = mann_whitney_u(a, b)
            ub, _ = mann_whitney_u(b, a)
            assert ua + ub == pytest.approx(len(a) * len(b))

    def test_symmetry_of_p(self, rng):
        for _ in range(50):
            a = rng.random(5).tolist()
            b = rng.random(7).tolist()
            _, pab = mann_whitney_u(a, b)
            _, pba = mann_whitney_u(b, a)
            assert pab == pytest.approx(pba, abs=1e-12)

    def test_exact_matches_approx_when_large(self, rng):
        a = rng.normal(0.0, 1.0, 10).tolist()
        b = rng.normal(0.5, 1.0, 10).tolist()
        _, p_exact = mann_whitney_u(a, b, method="exact")
        _, p_approx = mann_whitney_u(a, b, method="approx")
        assert abs(p_exact - p_approx) < 0.02

    def test_auto_switches_at_size_limit(self, rng):
        # just below the limit: exact and auto agree to the last bit
        a = rng.random(EXACT_SIZE_LIMIT // 2).tolist()
        b = rng.random(EXACT_SIZE_LIMIT - len(a)).tolist()
        assert mann_whitney_u(a, b) == mann_whitney_u(a, b, method="exact")

    def test_tied_exact_path(self):
        u, p = mann_whitney_u([1, 1, 2], [1, 2, 2], method="exact")
        assert 0.0 < p <= 1.0
        # complement still holds under midranks
        u2, _ = mann_whitney_u([1, 2, 2], [1, 1, 2], method="exact")
        assert u + u2 == pytest.approx(9.0)

    def test_separated_samples_small_p(self):
        _, p = mann_whitney_u(list(range(10)), list(range(100, 110)))
        assert p < 0.001

    def test_validation(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1.0])
        with pytest.raises(ValueError):
            mann_whitney_u([1.0], [1.0], method="bogus")

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.lists(st.integers(0, 20), min_size=1, max_size=5),
        b=st.lists(st.integers(0, 20), min_size=1, max_size=5),
    )
    def test_p_is_a_probability(self, a, b):
        _, p = mann_whitney_u(a, b)
        assert 0.0 < p <= 1.0
