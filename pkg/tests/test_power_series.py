"""Tests for product sums, the Weierstrass test and multivariate series."""

import itertools
import math
import warnings

import numpy as np
import pytest

from levyhjmm.core.errors import DivergenceWarning, RadiusError
from levyhjmm.core.power_series import (
    MultiSeries,
    geometric_tail,
    graded_bounds,
    graded_indices,
    multivariate_eval,
    product_series_sum,
    series_demo_table,
    uniform_convergence_bound,
)


def exp_coefficient(k):
    return 1.0 / math.prod(math.factorial(i) for i in k)


def random_geometric_terms(rng, size):
    """Random signs and magnitudes under a geometric envelope q^k."""
    q = rng.uniform(0.2, 0.8)
    return rng.choice([-1.0, 1.0], size=size) * rng.uniform(0.0, 1.0, size=size) * q ** np.arange(size)


def random_bounded_series(rng, p, N):
    """Series whose witness terms |c_k (x - a)^k| never exceed the constant term 1."""
    q = rng.uniform(0.3, 0.8, size=p)
    center = rng.uniform(-1.0, 1.0, size=p)
    witness = center + rng.choice([-1.0, 1.0], size=p) / q
    table = {}
    for n in range(N + 1):
        for k in graded_indices(p, n):
            table[k] = rng.choice([-1.0, 1.0]) * rng.uniform(0.0, 1.0) * float(np.prod(q ** np.array(k)))
    table[(0,) * p] = 1.0
    return table, tuple(center), tuple(witness), q


class TestProductSum:
    """Cauchy products of absolutely convergent series."""

    def test_geometric(self):
        a = 0.5 ** np.arange(200)
        b = 0.3 ** np.arange(200)
        with warnings.catch_warnings():
            warnings.simplefilter("error", DivergenceWarning)
            result = product_series_sum(a, b)
        assert result.value == pytest.approx(2.0 / 0.7)
        assert result.difference < 1e-12

    def test_alternating(self):
        a = [(-1) ** k / math.factorial(k) for k in range(30)]
        result = product_series_sum(a, a)
        assert result.value == pytest.approx(math.exp(-2.0))
        assert result.double_sum == pytest.approx(result.value, abs=1e-14)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_pairs_agree_with_double_sum(self, seed):
        rng = np.random.default_rng(seed)
        a, b = (random_geometric_terms(rng, 200) for _ in range(2))
        with warnings.catch_warnings():
            warnings.simplefilter("error", DivergenceWarning)
            result = product_series_sum(a, b)
        assert result.difference <= 1e-10
        assert result.value == pytest.approx(np.sum(a) * np.sum(b), rel=1e-12, abs=1e-12)

    def test_slow_series_warns(self):
        harmonic = 1.0 / np.arange(1, 1001)
        with pytest.warns(DivergenceWarning):
            product_series_sum(harmonic, [1.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            product_series_sum([1.0, math.inf], [1.0])


class TestWeierstrass:
    """Settling of sup-norm partial sums."""

    def test_geometric_settles(self):
        assert uniform_convergence_bound(2.0 ** -np.arange(100))

    def test_inverse_squares_do_not(self):
        assert not uniform_convergence_bound(1.0 / np.arange(1, 101) ** 2)

    def test_edge_cases(self):
        assert uniform_convergence_bound([])
        assert uniform_convergence_bound([0.0, 0.0])
        assert not uniform_convergence_bound([1.0, math.inf])
        with pytest.raises(ValueError):
            uniform_convergence_bound([1.0, -0.5])


class TestGradedSums:
    """Multi-indices and complete homogeneous sums."""

    def test_indices(self):
        assert graded_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
        assert len(graded_indices(3, 4)) == 15
        assert all(sum(k) == 4 for k in graded_indices(3, 4))

    def test_bounds_match_brute_force(self):
        theta = (0.3, 0.5, 0.2)
        bounds = graded_bounds(theta, 6)
        for n in range(7):
            brute = sum(math.prod(t**i for t, i in zip(theta, k)) for k in graded_indices(3, n))
            assert bounds[n] == pytest.approx(brute)

    def test_one_variable(self):
        np.testing.assert_allclose(graded_bounds([0.4], 5), 0.4 ** np.arange(6))


class TestGeometricTail:
    """Tail sums over total degree > N."""

    def test_one_variable(self):
        assert geometric_tail([0.5], 3) == pytest.approx(0.125)

    def test_two_variables(self):
        # sum_n (n + 1) / 2^n = 4
        assert geometric_tail([0.5, 0.5], 2) == pytest.approx(4.0 - 2.75)

    def test_monotone_in_N(self):
        tails = [geometric_tail([0.9, 0.6, 0.3], N) for N in range(0, 60, 5)]
        assert all(a > b for a, b in zip(tails, tails[1:]))

    def test_zero_ratio(self):
        assert geometric_tail([0.0, 0.0], 4) == 0.0

    def test_ratio_one(self):
        with pytest.raises(RadiusError):
            geometric_tail([0.5, 1.0], 4)


class TestMultiSeries:
    """Construction and validation of truncated multivariate series."""

    def test_from_function(self):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=4, witness=(3.0, 3.0))
        assert series.degree == 4
        assert len(series.coefficients) == 15
        assert series.coefficients[(2, 1)] == pytest.approx(0.5)

    def test_witness_bound(self):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=10, witness=(3.0, 3.0))
        assert series.witness_bound() == pytest.approx(4.5**2)

    def test_witness_on_center(self):
        with pytest.raises(ValueError):
            MultiSeries(p=1, coefficients={(0,): 1.0}, center=(0.0,), witness=(0.0,))

    def test_bad_index(self):
        with pytest.raises(ValueError):
            MultiSeries(p=2, coefficients={(1,): 1.0}, center=(0.0, 0.0), witness=(1.0, 1.0))


class TestMultivariateEval:
    """Truncated evaluation with certified tails."""

    @pytest.mark.parametrize("N", [4, 8, 12])
    def test_exponential(self, N):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=N, witness=(3.0, 3.0))
        value, tail = multivariate_eval(series, (0.5, 0.5), r=1.0)
        assert abs(value - math.e) <= tail

    def test_lower_truncation(self):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=12, witness=(3.0, 3.0))
        coarse, coarse_tail = multivariate_eval(series, (0.3, -0.4), r=0.5, N=3)
        fine, fine_tail = multivariate_eval(series, (0.3, -0.4), r=0.5)
        assert fine_tail < coarse_tail
        assert abs(fine - math.exp(-0.1)) < abs(coarse - math.exp(-0.1))

    def test_three_variables(self):
        series = MultiSeries.from_function(exp_coefficient, p=3, N=14, witness=(2.0, 2.0, 2.0))
        value, tail = multivariate_eval(series, (0.2, 0.1, -0.3), r=0.5)
        assert value == pytest.approx(1.0, abs=1e-9)
        assert abs(value - 1.0) <= tail

    @pytest.mark.parametrize("seed", range(20))
    def test_random_series_tail_covers_error(self, seed):
        rng = np.random.default_rng(1000 + seed)
        p = 2 + seed % 2
        table, center, witness, q = random_bounded_series(rng, p, N=30)
        r = 0.5 / q.max()
        direction = rng.normal(size=p)
        z = np.asarray(center) + r * rng.uniform(0.5, 1.0) * direction / np.linalg.norm(direction)

        def build(N):
            return MultiSeries.from_function(table.__getitem__, p=p, N=N, center=center, witness=witness)

        coarse = build(6)
        assert coarse.witness_bound() == 1.0
        value, tail = multivariate_eval(coarse, z, r)
        reference, reference_tail = multivariate_eval(build(30), z, r)
        assert reference_tail < 1e-5
        assert abs(value - reference) + reference_tail <= tail

    def test_radius_too_large(self):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=4, witness=(3.0, 3.0))
        with pytest.raises(RadiusError):
            multivariate_eval(series, (0.0, 0.0), r=3.5)
        with pytest.raises(RadiusError):
            multivariate_eval(series, (0.0, 0.0), r=0.0)

    def test_point_outside_ball(self):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=4, witness=(3.0, 3.0))
        with pytest.raises(RadiusError):
            multivariate_eval(series, (1.0, 1.0), r=1.0)

    def test_wrong_dimension(self):
        series = MultiSeries.from_function(exp_coefficient, p=2, N=4, witness=(3.0, 3.0))
        with pytest.raises(ValueError):
            multivariate_eval(series, (0.1, 0.1, 0.1), r=1.0)


class TestDemoTable:
    """Sum of (z - a)^k at z = (1/2, ..., 1/2)."""

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_errors_shrink_and_are_bounded(self, p):
        rows = series_demo_table([5, 10, 20, 40], p=p)
        assert [row["N"] for row in rows] == [5, 10, 20, 40]
        assert all(row["exact"] == 2.0**p for row in rows)
        errors = [row["error"] for row in rows]
        assert all(a > b for a, b in zip(errors, errors[1:]))
        for row in rows:
            assert row["error"] <= row["tail_bound"]
            assert isinstance(row["weierstrass"], bool)

    def test_closed_form_partial_sum(self):
        (row,) = series_demo_table([3], p=2)
        expected = sum(0.5 ** sum(k) for k in itertools.product(range(4), repeat=2) if sum(k) <= 3)
        assert row["value"] == pytest.approx(expected)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            series_demo_table([5], p=4)
