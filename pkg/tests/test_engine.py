"""Tests for the HJMM engine: drift, full and reduced schemes, pricing."""

import math

import numpy as np
import pytest

from levyhjmm.core.curve_space import CurveSpaceConfig, ForwardCurve
from levyhjmm.core.engine import (
    VolatilityStructure,
    bank_account,
    bond_price,
    bond_prices,
    hjm_drift,
    hjm_drift_derivative_form,
    martingale_test,
    path_increments,
    psi_path,
    simulate_full,
    simulate_paths,
    simulate_reduced,
    yield_curve,
)
from levyhjmm.core.errors import InvalidSpec, NoRealization, NumericsError, RangeError
from levyhjmm.core.levy_models import draw_increments, path_rng
from levyhjmm.core.spec_dsl import parse

from .conftest import CORPUS, spec_text


def vasicek_psi(h0, rho, theta, t, x):
    """Leaf path of the constant-volatility Brownian model with lambda = rho e^{-theta x}."""
    first = (np.exp(-theta * x) - np.exp(-theta * (x + t))) / theta
    second = (np.exp(-2 * theta * x) - np.exp(-2 * theta * (x + t))) / (2 * theta)
    return h0 + rho**2 / theta * (first - second)


# (n_grid, n_steps) on x_max = 20 and a unit horizon; dt / dx stays at 0.512.
REFINEMENT_LEVELS = ((257, 25), (513, 50), (1025, 100))


def coarsen(increments, factor):
    """Sum consecutive increments so a coarser time grid sees the same driving path."""
    return increments.reshape(*increments.shape[:-1], -1, factor).sum(axis=-1)


class TestDrift:
    """No-arbitrage drift."""

    @pytest.mark.parametrize("name", CORPUS)
    def test_forms_agree(self, load, name):
        spec = load(name, n_grid=2001)
        config = spec.curve_config()
        sigma = VolatilityStructure(spec, config).sigma(spec.initial_forward_curve())
        direct = hjm_drift(sigma, spec.levy).values
        derived = hjm_drift_derivative_form(sigma, spec.levy).values
        scale = max(1.0, np.max(np.abs(direct)))
        assert np.max(np.abs(direct - derived)) <= 10 * config.dx**2 * scale

    def test_vasicek_closed_form(self, load):
        spec = load("vasicek", n_grid=2048)
        config = spec.curve_config()
        sigma = VolatilityStructure(spec, config).sigma(spec.initial_forward_curve())
        x = config.grid
        expected = 0.04 * np.exp(-x) * (1 - np.exp(-x))
        np.testing.assert_allclose(hjm_drift(sigma, spec.levy).values, expected, atol=1e-6)

    def test_zero_volatility_has_zero_drift(self, space):
        spec = parse(spec_text(lam="exp_poly(rho = 0.0)"))
        sigma = VolatilityStructure(spec, space).sigma(ForwardCurve.flat(0.03, space))
        assert np.all(hjm_drift(sigma, spec.levy).values == 0.0)


class TestFullScheme:
    """Grid simulation of the full curve dynamics."""

    def test_shapes(self, load):
        spec = load("cp_exponential")
        result = simulate_full(spec, spec.initial_forward_curve(), 1.0, 20, path_rng(1, 0))
        assert result.values.shape == (21, spec.curve_config().n_grid)
        assert result.times[-1] == 1.0
        assert result.short_rates[0] == pytest.approx(0.02)
        assert len(result.curves) == 21
        assert result.terminal_curve.values[0] == result.short_rates[-1]

    def test_zero_volatility_is_pure_transport(self):
        spec = parse(spec_text(lam="exp_poly(rho = 0.0)", space="x_max = 20.0  n_grid = 201"))
        config = spec.curve_config()
        h0 = ForwardCurve.from_function(lambda x: 0.03 + 0.02 * np.exp(-x), config)
        result = simulate_full(spec, h0, 1.0, 10, path_rng(2, 0))
        x = config.grid[:-10]
        np.testing.assert_allclose(result.values[-1][:-10], 0.03 + 0.02 * np.exp(-(x + 1.0)), atol=1e-12)

    def test_explicit_increments(self, load):
        spec = load("vasicek")
        h0 = spec.initial_forward_curve()
        increments = draw_increments(spec.levy, 0.05, 20, path_rng(3, 0))
        first = simulate_full(spec, h0, 1.0, 20, increments=increments)
        again = simulate_full(spec, h0, 1.0, 20, path_rng(3, 0))
        np.testing.assert_array_equal(first.values, again.values)

    def test_needs_randomness(self, load):
        spec = load("vasicek")
        with pytest.raises(ValueError):
            simulate_full(spec, spec.initial_forward_curve(), 1.0, 10)

    def test_wrong_increment_count(self, load):
        spec = load("vasicek")
        with pytest.raises(ValueError):
            simulate_full(spec, spec.initial_forward_curve(), 1.0, 10, increments=np.zeros(5))

    def test_invalid_spec_is_refused(self, space):
        spec = parse(spec_text(lam="exp_poly(rho = 2.0, theta = 1.0)"))
        with pytest.raises(InvalidSpec) as info:
            simulate_full(spec, ForwardCurve.flat(0.0, spec.curve_config()), 1.0, 10, path_rng(0, 0))
        assert "volatility_exits_k" in str(info.value)

    def test_overflow_guard(self, load):
        spec = load("vasicek")
        h0 = ForwardCurve.flat(1e9, spec.curve_config())
        with pytest.raises(NumericsError):
            simulate_full(spec, h0, 1.0, 10, path_rng(0, 0))


class TestLeafPath:
    """Noiseless integration against the closed-form leaf."""

    def test_refinement(self, load):
        spec = load("vasicek", n_grid=2049)
        config = spec.curve_config()
        vol = VolatilityStructure(spec, config)
        h0 = spec.initial_forward_curve()
        x = config.grid[:1024]
        errors = []
        for n_steps in (25, 50, 100):
            path = psi_path(vol, spec.levy, h0.values, 1.0 / n_steps, n_steps)
            exact = vasicek_psi(0.03, 0.2, 1.0, 1.0, x)
            errors.append(np.max(np.abs(path[-1][:1024] - exact)))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-3


class TestReducedScheme:
    """Finite-dimensional simulation through the realization."""

    def test_matches_full_scheme(self, load):
        spec = load("vasicek", n_grid=2049)
        h0 = spec.initial_forward_curve()
        increments = draw_increments(spec.levy, 0.01, 100, path_rng(5, 0))
        full = simulate_full(spec, h0, 1.0, 100, increments=increments)
        reduced = simulate_reduced(spec, h0, 1.0, 100, increments=increments)
        assert reduced.mode == "reduced"
        assert reduced.states.shape == (101, 1)
        assert np.max(np.abs(full.values[:, :1024] - reduced.values[:, :1024])) < 1e-3
        np.testing.assert_allclose(full.short_rates, reduced.short_rates, atol=1e-3)

    def test_one_dimensional_state_is_discrete_ou(self, load):
        spec = load("vasicek")
        h0 = spec.initial_forward_curve()
        dt, n_steps = 0.02, 50
        increments = draw_increments(spec.levy, dt, n_steps, path_rng(6, 0))
        result = simulate_reduced(spec, h0, dt * n_steps, n_steps, increments=increments)
        expected = np.zeros(n_steps + 1)
        for k in range(n_steps):
            expected[k + 1] = math.exp(-dt) * (expected[k] + 0.2 * increments[k])
        np.testing.assert_allclose(result.short_rates - result.psi[:, 0], expected, atol=1e-12)

    def test_two_dimensional_realization(self, load):
        spec = load("vasicek_xexp")
        h0 = spec.initial_forward_curve()
        result = simulate_reduced(spec, h0, 1.0, 20, path_rng(7, 0))
        assert result.states.shape == (21, 2)
        assert len(result.basis) == 2

    def test_needs_randomness(self, load):
        spec = load("vasicek")
        with pytest.raises(ValueError):
            simulate_reduced(spec, spec.initial_forward_curve(), 1.0, 10)

    def test_wrong_increment_count(self, load):
        spec = load("vasicek")
        with pytest.raises(ValueError, match="increments"):
            simulate_reduced(spec, spec.initial_forward_curve(), 1.0, 10, increments=np.zeros(5))
        with pytest.raises(ValueError, match="increments"):
            simulate_reduced(spec, spec.initial_forward_curve(), 1.0, 10, increments=np.zeros((2, 10)))

    @pytest.mark.parametrize("name", ["vasicek", "vasicek_xexp"])
    def test_gap_to_full_scheme_shrinks_under_refinement(self, load, name):
        finest = REFINEMENT_LEVELS[-1][1]
        levy = load(name).levy
        fine = np.stack([draw_increments(levy, 1.0 / finest, finest, path_rng(21, i)) for i in range(8)])
        gaps = []
        for n_grid, n_steps in REFINEMENT_LEVELS:
            spec = load(name, n_grid=n_grid)
            h0 = spec.initial_forward_curve()
            half = (n_grid - 1) // 2
            gap = 0.0
            for path in coarsen(fine, finest // n_steps):
                full = simulate_full(spec, h0, 1.0, n_steps, increments=path)
                reduced = simulate_reduced(spec, h0, 1.0, n_steps, increments=path)
                gap = max(gap, float(np.max(np.abs(full.values[-1][:half] - reduced.values[-1][:half]))))
            gaps.append(gap)
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.5 * gaps[0]

    def test_no_realization(self, load):
        spec = load("sigmoid_cp")
        with pytest.raises(NoRealization):
            simulate_reduced(spec, spec.initial_forward_curve(), 1.0, 10, path_rng(0, 0))


class TestPathBatches:
    """Batched simulation with per-path streams."""

    def test_thread_count_does_not_matter(self, load):
        spec = load("cp_exponential")
        h0 = spec.initial_forward_curve()
        one = simulate_paths(spec, h0, 1.0, 20, seed=11, n_paths=7, mode="both", threads=1)
        three = simulate_paths(spec, h0, 1.0, 20, seed=11, n_paths=7, mode="both", threads=3)
        np.testing.assert_array_equal(one.increments, three.increments)
        np.testing.assert_array_equal(one.terminal, three.terminal)
        np.testing.assert_array_equal(one.reduced_terminal, three.reduced_terminal)

    def test_paths_use_their_own_streams(self, load):
        spec = load("cp_exponential")
        batch = simulate_paths(spec, spec.initial_forward_curve(), 1.0, 20, seed=11, n_paths=4, threads=2)
        np.testing.assert_array_equal(batch.increments[2], draw_increments(spec.levy, 0.05, 20, path_rng(11, 2)))
        np.testing.assert_array_equal(batch.increments, path_increments(spec.levy, 0.05, 20, 11, range(4)))
        assert batch.n_paths == 4

    def test_both_modes_share_increments(self, load):
        spec = load("vasicek")
        batch = simulate_paths(spec, spec.initial_forward_curve(), 1.0, 50, seed=3, n_paths=5, mode="both", keep_curves=True)
        assert batch.curves.shape == batch.reduced_curves.shape == (5, 51, spec.curve_config().n_grid)
        assert np.max(np.abs(batch.short_rates - batch.reduced_short_rates)) < 1e-2
        single = simulate_full(spec, spec.initial_forward_curve(), 1.0, 50, increments=batch.increments[4])
        np.testing.assert_allclose(single.values[-1], batch.terminal[4], rtol=1e-12, atol=1e-15)

    def test_single_path_replays_batch_path(self, load):
        spec = load("cp_exponential")
        h0 = spec.initial_forward_curve()
        batch = simulate_paths(spec, h0, 1.0, 20, seed=11, n_paths=4, mode="both", threads=2)
        full = simulate_full(spec, h0, 1.0, 20, seed=11, path_index=2)
        reduced = simulate_reduced(spec, h0, 1.0, 20, seed=11, path_index=2)
        assert (full.seed, full.path_index) == (11, 2)
        assert (reduced.seed, reduced.path_index) == (11, 2)
        np.testing.assert_array_equal(full.increments, batch.increments[2])
        np.testing.assert_allclose(full.short_rates, batch.short_rates[2], rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(reduced.short_rates, batch.reduced_short_rates[2], rtol=1e-12, atol=1e-15)

    def test_explicit_randomness_has_no_seed(self, load):
        spec = load("vasicek")
        result = simulate_full(spec, spec.initial_forward_curve(), 1.0, 10, path_rng(4, 0))
        assert result.seed is None
        assert result.path_index == 0

    def test_bad_mode(self, load):
        spec = load("vasicek")
        with pytest.raises(ValueError, match="mode"):
            simulate_paths(spec, spec.initial_forward_curve(), 1.0, 10, seed=1, n_paths=2, mode="exact")


class TestPricing:
    """Bond prices, bank account and yields."""

    def test_flat_curve(self, space):
        curve = ForwardCurve.flat(0.03, space)
        assert bond_price(curve, 5.0) == pytest.approx(math.exp(-0.15))
        assert bond_price(curve, 3.33) == pytest.approx(math.exp(-0.03 * 3.33))
        assert bond_price(curve, 0.0) == 1.0
        np.testing.assert_allclose(yield_curve(curve, [0.0, 1.0, 7.5]), 0.03)

    def test_linear_curve_is_integrated_exactly(self, space):
        curve = ForwardCurve.from_function(lambda x: 0.01 + 0.002 * x, space)
        tau = 3.33
        assert bond_price(curve, tau) == pytest.approx(math.exp(-(0.01 * tau + 0.001 * tau**2)), rel=1e-12)

    def test_vectorized_prices(self, space):
        stack = np.stack([np.full(space.n_grid, 0.01), np.full(space.n_grid, 0.02)])
        np.testing.assert_allclose(bond_prices(stack, 2.0, space), np.exp([-0.02, -0.04]))

    def test_beyond_grid(self, space):
        with pytest.raises(RangeError):
            bond_price(ForwardCurve.flat(0.03, space), 25.0)

    def test_bank_account(self):
        times = np.linspace(0.0, 2.0, 11)
        assert bank_account(np.full(11, 0.05), times) == pytest.approx(math.exp(0.1))
        assert bank_account(np.array([0.05]), np.array([0.0])) == 1.0
        with pytest.raises(ValueError):
            bank_account(np.zeros(3), times)

    def test_smooth_curve_against_quadrature(self):
        config = CurveSpaceConfig(beta=0.5, beta_prime=1.0, x_max=20.0, n_grid=2001)
        curve = ForwardCurve.from_function(lambda x: 0.03 + 0.02 * np.exp(-x), config)
        tau = 4.0
        exact = math.exp(-(0.03 * tau + 0.02 * (1 - math.exp(-tau))))
        assert bond_price(curve, tau) == pytest.approx(exact, rel=1e-6)


class TestMartingale:
    """Discounted bond prices are martingales when the drift is on."""

    @pytest.mark.slow
    @pytest.mark.parametrize("name", CORPUS)
    def test_discounted_prices(self, load, name):
        report = martingale_test(load(name), 2.0, n_paths=10_000, seed=2024, n_steps=200)
        assert (report.n_paths, report.n_steps, report.t) == (10_000, 200, 1.0)
        assert abs(report.z_score) <= 3.0

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["vasicek", "cp_exponential"])
    def test_without_drift_fails(self, load, name):
        report = martingale_test(load(name), 2.0, n_paths=10_000, seed=2024, n_steps=200, drift_enabled=False)
        assert not report.drift_enabled
        assert abs(report.z_score) > 3.0

    def test_reference_is_initial_price(self, load):
        report = martingale_test(load("vasicek"), 2.0, n_paths=16, seed=5, n_steps=20)
        assert report.reference == pytest.approx(math.exp(-0.06))
        assert report.stderr > 0.0

    def test_maturity_beyond_grid(self, load):
        with pytest.raises(RangeError):
            martingale_test(load("vasicek"), 30.0, n_paths=10, seed=1)
