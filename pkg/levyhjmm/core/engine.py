"""
HJMM forward-curve dynamics: no-arbitrage drift, full grid simulation,
reduced finite-dimensional simulation, and zero-coupon pricing.

The full scheme is a semigroup splitting step

    r <- S_dt( r + alpha(r) dt + sigma(r) dX ),

with sigma evaluated at the curve before the step. Paths are simulated in
vectorized batches; every path draws its increments from its own stream
(seed, path index), so results do not depend on batching or thread count.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.integrate import trapezoid
from scipy.linalg import expm

from levyhjmm.core.config import config as app_config
from levyhjmm.core.config import numerics_config
from levyhjmm.core.curve_space import (
    CurveSpaceConfig,
    ForwardCurve,
    GridShift,
    differentiate,
    integral_values,
)
from levyhjmm.core.errors import InvalidSpec, NoRealization, NumericsError, RangeError
from levyhjmm.core.levy_models import (
    LevyModel,
    cumulant,
    cumulant_derivative,
    draw_increments,
    path_rng,
)
from levyhjmm.core.quasi_exp import ExpPoly, coordinates, shift_matrix
from levyhjmm.core.spec_dsl import ConstantPhi, ModelSpec, curve_on_grid, has_errors, validate

logger = logging.getLogger(__name__)


class VolatilityStructure:
    """sigma(h) = sum_i Phi_i(h(0)) lambda_i with the lambda_i sampled on a grid."""

    def __init__(self, spec: ModelSpec, config: CurveSpaceConfig) -> None:
        self.config = config
        self.phis = [term.phi for term in spec.terms]
        self.directions = np.stack([curve_on_grid(term.lam, config).values for term in spec.terms])
        self.is_constant = all(isinstance(phi, ConstantPhi) for phi in self.phis)

    def weights(self, short_rates: np.ndarray) -> np.ndarray:
        """Phi_i evaluated at each short rate; shape (..., p)."""
        return np.stack([np.asarray(phi(short_rates), dtype=float) for phi in self.phis], axis=-1)

    def sigma_values(self, curves: np.ndarray) -> np.ndarray:
        return self.weights(curves[..., 0]) @ self.directions

    def sigma(self, curve: ForwardCurve) -> ForwardCurve:
        return ForwardCurve(self.sigma_values(curve.values), curve.config)


# ---------------------------------------------------------------------------
# Drift
# ---------------------------------------------------------------------------


def hjm_drift_values(sigma_values: np.ndarray, model: LevyModel, dx: float) -> np.ndarray:
    """-sigma * Psi'(-int_0^x sigma) along the last axis."""
    z = integral_values(sigma_values, dx)
    return -sigma_values * cumulant_derivative(model, z)


def hjm_drift(sigma_h: ForwardCurve, model: LevyModel) -> ForwardCurve:
    """No-arbitrage drift for the volatility curve sigma_h."""
    return ForwardCurve(hjm_drift_values(sigma_h.values, model, sigma_h.config.dx), sigma_h.config)


def hjm_drift_derivative_form(sigma_h: ForwardCurve, model: LevyModel) -> ForwardCurve:
    """The same drift written as d/dx Psi(-int_0^x sigma), by finite differences."""
    z = integral_values(sigma_h.values, sigma_h.config.dx)
    return differentiate(ForwardCurve(cumulant(model, z), sigma_h.config))


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """One simulated path.

    ``values`` holds one curve per time (rows). For reduced runs ``psi`` and
    ``states`` hold the leaf path and the state coordinates, and ``values``
    is their reconstruction psi + states @ basis.
    """

    times: np.ndarray
    values: np.ndarray
    increments: np.ndarray
    config: CurveSpaceConfig
    mode: str
    seed: Optional[int] = None
    path_index: int = 0
    psi: Optional[np.ndarray] = None
    states: Optional[np.ndarray] = None
    basis: Tuple[ExpPoly, ...] = ()

    @property
    def curves(self) -> List[ForwardCurve]:
        return [ForwardCurve(row, self.config) for row in self.values]

    @property
    def terminal_curve(self) -> ForwardCurve:
        return ForwardCurve(self.values[-1], self.config)

    @property
    def short_rates(self) -> np.ndarray:
        return self.values[:, 0].copy()


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Many paths sharing a time grid; arrays are indexed by path first."""

    times: np.ndarray
    increments: np.ndarray
    seed: int
    config: CurveSpaceConfig
    short_rates: Optional[np.ndarray] = None
    terminal: Optional[np.ndarray] = None
    curves: Optional[np.ndarray] = None
    reduced_short_rates: Optional[np.ndarray] = None
    reduced_terminal: Optional[np.ndarray] = None
    reduced_curves: Optional[np.ndarray] = None
    states: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    basis: Tuple[ExpPoly, ...] = field(default=())

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]


def _require_valid(spec: ModelSpec) -> None:
    diagnostics = validate(spec)
    if has_errors(diagnostics):
        raise InvalidSpec([d for d in diagnostics if d.severity == "error"])


def _check_guard(values: np.ndarray, step: int) -> None:
    guard = numerics_config.overflow_guard
    peak = np.max(np.abs(values)) if values.size else 0.0
    if not np.isfinite(peak) or peak > guard:
        raise NumericsError(f"curve value {peak:.3e} exceeds overflow guard {guard:.1e} at step {step}")


# ---------------------------------------------------------------------------
# Full scheme
# ---------------------------------------------------------------------------


def _full_batch(
    vol: VolatilityStructure,
    model: LevyModel,
    h0_values: np.ndarray,
    dt: float,
    increments: np.ndarray,
    drift_enabled: bool,
    keep_curves: bool,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    n_paths, n_steps = increments.shape
    config = vol.config
    shifter = GridShift(config, dt)

    r = np.tile(h0_values, (n_paths, 1))
    short = np.empty((n_paths, n_steps + 1))
    short[:, 0] = r[:, 0]
    history = np.empty((n_paths, n_steps + 1, config.n_grid)) if keep_curves else None
    if history is not None:
        history[:, 0] = r

    if vol.is_constant:
        sigma = vol.sigma_values(r[:1])
        alpha = hjm_drift_values(sigma, model, config.dx) if drift_enabled else np.zeros_like(sigma)

    for k in range(n_steps):
        if not vol.is_constant:
            sigma = vol.sigma_values(r)
            alpha = hjm_drift_values(sigma, model, config.dx) if drift_enabled else np.zeros_like(sigma)
        r = shifter(r + alpha * dt + sigma * increments[:, k : k + 1])
        _check_guard(r, k + 1)
        short[:, k + 1] = r[:, 0]
        if history is not None:
            history[:, k + 1] = r
    return r, short, history


def _path_increments(
    model: LevyModel,
    dt: float,
    n_steps: int,
    rng: Optional[np.random.Generator],
    increments: Optional[np.ndarray],
    seed: Optional[int],
    path_index: int,
) -> np.ndarray:
    """Explicit increments, a draw from ``rng``, or path ``path_index`` of the stream for ``seed``."""
    if increments is None:
        if rng is None:
            if seed is None:
                raise ValueError("need an rng, a seed or explicit increments")
            rng = path_rng(seed, path_index)
        increments = draw_increments(model, dt, n_steps, rng)
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (n_steps,):
        raise ValueError(f"need {n_steps} increments, got shape {increments.shape}")
    return increments


def simulate_full(
    spec: ModelSpec,
    h0: ForwardCurve,
    horizon: float,
    n_steps: int,
    rng: Optional[np.random.Generator] = None,
    *,
    increments: Optional[np.ndarray] = None,
    drift_enabled: bool = True,
    seed: Optional[int] = None,
    path_index: int = 0,
) -> SimulationResult:
    """Simulate one path of the full curve dynamics on the grid of ``h0``.

    Without ``rng`` or ``increments`` the path draws from the same per-path
    stream as path ``path_index`` of ``simulate_paths(..., seed=seed)``.
    """
    _require_valid(spec)
    if horizon <= 0 or n_steps < 1:
        raise ValueError(f"need horizon > 0 and n_steps >= 1, got {horizon}, {n_steps}")
    dt = horizon / n_steps
    increments = _path_increments(spec.levy, dt, n_steps, rng, increments, seed, path_index)

    vol = VolatilityStructure(spec, h0.config)
    _, _, history = _full_batch(vol, spec.levy, h0.values, dt, increments[None, :], drift_enabled, True)
    return SimulationResult(
        times=np.linspace(0.0, horizon, n_steps + 1),
        values=history[0],
        increments=increments,
        config=h0.config,
        mode="full",
        seed=seed,
        path_index=path_index,
    )


# ---------------------------------------------------------------------------
# Reduced scheme
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReducedDynamics:
    """Leaf path psi and the linear state equation on the realization space."""

    basis: Tuple[ExpPoly, ...]
    basis_values: np.ndarray  # (d, G)
    propagator: np.ndarray  # expm(D dt)
    loadings: np.ndarray  # (d, p): coordinates of lambda_i
    psi: np.ndarray  # (n + 1, G)
    forcing: np.ndarray  # (n + 1, d): s_k = loadings @ Phi(psi_k)


def psi_path(
    vol: VolatilityStructure, model: LevyModel, h0_values: np.ndarray, dt: float, n_steps: int
) -> np.ndarray:
    """Noiseless splitting integration of d psi/dt = d/dx psi + alpha(psi)."""
    config = vol.config
    shifter = GridShift(config, dt)
    path = np.empty((n_steps + 1, config.n_grid))
    path[0] = h0_values
    current = h0_values[None, :]
    for k in range(n_steps):
        alpha = hjm_drift_values(vol.sigma_values(current), model, config.dx)
        current = shifter(current + alpha * dt)
        _check_guard(current, k + 1)
        path[k + 1] = current[0]
    return path


def reduced_dynamics(
    spec: ModelSpec, vol: VolatilityStructure, h0: ForwardCurve, dt: float, n_steps: int
) -> ReducedDynamics:
    from levyhjmm.core.realization import check_sufficient

    report = check_sufficient(spec)
    if not report.exists:
        raise NoRealization(f"no affine realization: {report.reason}")

    basis = tuple(report.basis)
    d_matrix = shift_matrix(basis)
    loadings = np.column_stack([coordinates(term.lam, basis)[0] for term in spec.terms])
    psi = psi_path(vol, spec.levy, h0.values, dt, n_steps)
    forcing = vol.weights(psi[:, 0]) @ loadings.T
    return ReducedDynamics(
        basis=basis,
        basis_values=np.stack([b.evaluate(h0.config.grid) for b in basis]),
        propagator=expm(d_matrix * dt),
        loadings=loadings,
        psi=psi,
        forcing=forcing,
    )


def _reduced_states(dynamics: ReducedDynamics, increments: np.ndarray) -> np.ndarray:
    """State paths Z, shape (paths, n + 1, d), from Z_{k+1} = E (Z_k + s_k dX_k)."""
    n_paths, n_steps = increments.shape
    d = dynamics.propagator.shape[0]
    states = np.zeros((n_paths, n_steps + 1, d))
    z = np.zeros((n_paths, d))
    for k in range(n_steps):
        z = (z + increments[:, k : k + 1] * dynamics.forcing[k][None, :]) @ dynamics.propagator.T
        states[:, k + 1] = z
    return states


def simulate_reduced(
    spec: ModelSpec,
    h0: ForwardCurve,
    horizon: float,
    n_steps: int,
    rng: Optional[np.random.Generator] = None,
    *,
    increments: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
    path_index: int = 0,
) -> SimulationResult:
    """Simulate one path through the finite-dimensional realization."""
    _require_valid(spec)
    if horizon <= 0 or n_steps < 1:
        raise ValueError(f"need horizon > 0 and n_steps >= 1, got {horizon}, {n_steps}")
    dt = horizon / n_steps
    increments = _path_increments(spec.levy, dt, n_steps, rng, increments, seed, path_index)

    vol = VolatilityStructure(spec, h0.config)
    dynamics = reduced_dynamics(spec, vol, h0, dt, n_steps)
    states = _reduced_states(dynamics, increments[None, :])[0]
    values = dynamics.psi + states @ dynamics.basis_values
    return SimulationResult(
        times=np.linspace(0.0, horizon, n_steps + 1),
        values=values,
        increments=increments,
        config=h0.config,
        mode="reduced",
        seed=seed,
        path_index=path_index,
        psi=dynamics.psi,
        states=states,
        basis=dynamics.basis,
    )


# ---------------------------------------------------------------------------
# Batches of paths
# ---------------------------------------------------------------------------


def path_increments(model: LevyModel, dt: float, n_steps: int, seed: int, path_indices: Sequence[int]) -> np.ndarray:
    return np.stack([draw_increments(model, dt, n_steps, path_rng(seed, int(i))) for i in path_indices])


def _chunks(n_paths: int, n_chunks: int) -> List[np.ndarray]:
    return [c for c in np.array_split(np.arange(n_paths), max(1, min(n_chunks, n_paths))) if c.size]


def simulate_paths(
    spec: ModelSpec,
    h0: ForwardCurve,
    horizon: float,
    n_steps: int,
    seed: int,
    n_paths: int,
    mode: str = "full",
    *,
    threads: Optional[int] = None,
    drift_enabled: bool = True,
    keep_curves: bool = False,
) -> PathBatch:
    """Simulate ``n_paths`` paths; mode is "full", "reduced" or "both".

    Both modes consume the same increments for a given (seed, path index).
    """
    if mode not in ("full", "reduced", "both"):
        raise ValueError(f"mode must be full, reduced or both, got {mode!r}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    _require_valid(spec)
    if horizon <= 0 or n_steps < 1:
        raise ValueError(f"need horizon > 0 and n_steps >= 1, got {horizon}, {n_steps}")

    started = time.perf_counter()
    dt = horizon / n_steps
    threads = threads or app_config.threads
    config = h0.config
    vol = VolatilityStructure(spec, config)
    chunks = _chunks(n_paths, threads)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        increments = np.concatenate(
            list(pool.map(lambda idx: path_increments(spec.levy, dt, n_steps, seed, idx), chunks))
        )

        result = {}
        if mode in ("full", "both"):
            parts = list(
                pool.map(
                    lambda idx: _full_batch(vol, spec.levy, h0.values, dt, increments[idx], drift_enabled, keep_curves),
                    chunks,
                )
            )
            result["terminal"] = np.concatenate([p[0] for p in parts])
            result["short_rates"] = np.concatenate([p[1] for p in parts])
            if keep_curves:
                result["curves"] = np.concatenate([p[2] for p in parts])

    if mode in ("reduced", "both"):
        dynamics = reduced_dynamics(spec, vol, h0, dt, n_steps)
        states = _reduced_states(dynamics, increments)
        reduced_terminal = dynamics.psi[-1] + states[:, -1] @ dynamics.basis_values
        short = dynamics.psi[:, 0][None, :] + states @ dynamics.basis_values[:, 0]
        result.update(
            states=states,
            psi=dynamics.psi,
            basis=dynamics.basis,
            reduced_terminal=reduced_terminal,
            reduced_short_rates=short,
        )
        if keep_curves:
            result["reduced_curves"] = dynamics.psi[None, :, :] + states @ dynamics.basis_values

    logger.info(
        f"simulated {n_paths} {mode} paths in {(time.perf_counter() - started) * 1000:.1f} ms",
        extra={"n_paths": n_paths, "n_steps": n_steps, "seed": seed},
    )
    return PathBatch(
        times=np.linspace(0.0, horizon, n_steps + 1),
        increments=increments,
        seed=seed,
        config=config,
        **result,
    )


# ---------------------------------------------------------------------------
# Pricing
# ---------------------------------------------------------------------------


def _integral_to(values: np.ndarray, tau: float, config: CurveSpaceConfig) -> np.ndarray:
    """int_0^tau of curves along the last axis (trapezoid, partial last cell)."""
    if tau < 0 or tau > config.x_max * (1 + 1e-12):
        raise RangeError(f"maturity {tau} outside [0, x_max={config.x_max}]")
    position = tau / config.dx
    if abs(position - round(position)) < 1e-9:
        position = float(round(position))
    idx = min(int(math.floor(position)), config.n_grid - 1)
    whole = trapezoid(values[..., : idx + 1], dx=config.dx, axis=-1) if idx > 0 else np.zeros(values.shape[:-1])
    frac = position - idx
    if frac > 0.0 and idx < config.n_grid - 1:
        left = values[..., idx]
        at_tau = left + frac * (values[..., idx + 1] - left)
        whole = whole + 0.5 * (left + at_tau) * frac * config.dx
    return whole


def bond_price(curve: ForwardCurve, tau: float) -> float:
    """Zero-coupon price exp(-int_0^tau r(x) dx) for time to maturity tau."""
    return float(np.exp(-_integral_to(curve.values, tau, curve.config)))


def bond_prices(values: np.ndarray, tau: float, config: CurveSpaceConfig) -> np.ndarray:
    return np.exp(-_integral_to(values, tau, config))


def bank_account(short_rates: np.ndarray, times: np.ndarray) -> float:
    """exp(int_0^t r_s(0) ds) along a short-rate path."""
    short_rates = np.asarray(short_rates, dtype=float)
    times = np.asarray(times, dtype=float)
    if short_rates.shape[-1] != times.shape[-1]:
        raise ValueError(f"short rates ({short_rates.shape[-1]}) and times ({times.shape[-1]}) are not aligned")
    if times.shape[-1] < 2:
        return 1.0
    return np.exp(trapezoid(short_rates, times, axis=-1))


def yield_curve(curve: ForwardCurve, maturities: Sequence[float]) -> np.ndarray:
    """Continuously compounded yields -log P / tau (the short rate at tau = 0)."""
    out = []
    for tau in maturities:
        out.append(curve.values[0] if tau == 0 else -math.log(bond_price(curve, tau)) / tau)
    return np.array(out)


class MartingaleReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    maturity: float
    t: float
    n_paths: int
    n_steps: int
    seed: int
    drift_enabled: bool
    mean: float
    stderr: float
    reference: float
    z_score: float


def martingale_test(
    spec: ModelSpec,
    T: float,
    n_paths: int,
    seed: int,
    *,
    n_steps: int = 200,
    drift_enabled: bool = True,
    threads: Optional[int] = None,
) -> MartingaleReport:
    """Monte Carlo check of E[P(T/2, T) / B(T/2)] = P(0, T)."""
    config = spec.curve_config()
    if T <= 0 or T > config.x_max:
        raise RangeError(f"maturity {T} outside (0, x_max={config.x_max}]")
    h0 = spec.initial_forward_curve(config)
    t = T / 2.0
    batch = simulate_paths(spec, h0, t, n_steps, seed, n_paths, "full", threads=threads, drift_enabled=drift_enabled)

    prices = bond_prices(batch.terminal, T - t, config)
    discount = np.exp(-trapezoid(batch.short_rates, batch.times, axis=-1))
    samples = prices * discount

    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    reference = bond_price(h0, T)
    gap = mean - reference
    if stderr > 0.0:
        z_score = gap / stderr
    else:
        z_score = 0.0 if abs(gap) <= 1e-12 * max(1.0, abs(reference)) else math.copysign(math.inf, gap)

    logger.info(
        f"martingale test T={T}: mean={mean:.8f} ref={reference:.8f} z={z_score:.3f}",
        extra={"n_paths": n_paths, "n_steps": n_steps, "seed": seed},
    )
    return MartingaleReport(
        maturity=T,
        t=t,
        n_paths=n_paths,
        n_steps=n_steps,
        seed=seed,
        drift_enabled=drift_enabled,
        mean=mean,
        stderr=stderr,
        reference=reference,
        z_score=z_score,
    )
