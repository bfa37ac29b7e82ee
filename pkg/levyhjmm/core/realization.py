"""
Affine realizations of HJMM models.

``check_sufficient`` decides whether a spec admits a finite-dimensional
affine realization generated by V = span of all derivatives of the
volatility directions. ``check_necessary`` reports which hypotheses of the
jump-driven obstruction hold, and the rank probes show that obstruction
numerically: with jumps, the cumulant composed with non-constant
integrated volatilities spans spaces whose dimension keeps growing.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer
from scipy.stats import qmc

from levyhjmm.core.config import numerics_config
from levyhjmm.core.curve_space import (
    CurveSpaceConfig,
    ForwardCurve,
    basis_curves,
    differentiate,
    integral_values,
    norm_beta,
    project_onto,
)
from levyhjmm.core.engine import SimulationResult, VolatilityStructure, hjm_drift_values, psi_path
from levyhjmm.core.errors import NoRealization
from levyhjmm.core.levy_models import LevyModel, cumulant, jump_mass, moment_nonvanishing_index
from levyhjmm.core.quasi_exp import ExpPoly, decay_check, realization_space
from levyhjmm.core.spec_dsl import (
    ConstantPhi,
    Diagnostic,
    ModelSpec,
    SigmoidShortRatePhi,
    TabulatedCurve,
    validate,
)

logger = logging.getLogger(__name__)

MOMENT_SCAN_ORDER = 12


class RankProbe(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int
    rank: int
    singular_values: List[float]


class NecessaryConditions(BaseModel):
    """Which hypotheses of the jump obstruction hold for a spec and basis."""

    model_config = ConfigDict(frozen=True)

    n0: Optional[int]
    moment_condition: bool
    zero_prefix: List[Optional[float]]
    nonvanishing_condition: bool
    constant_direction: bool
    jump_measure_nonzero: bool
    sigma_varies_on_leaf: Optional[bool] = None
    applicable: bool
    notes: List[str] = Field(default_factory=list)


class RealizationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    exists: bool
    dimension: int
    basis: Tuple[Any, ...] = ()
    reason: str
    reason_code: str
    flags: Dict[str, bool] = Field(default_factory=dict)
    diagnostics: List[Diagnostic] = Field(default_factory=list)
    necessary: Optional[NecessaryConditions] = None
    rank_probes: List[RankProbe] = Field(default_factory=list)

    @field_serializer("basis")
    def _basis_text(self, basis: Tuple[Any, ...]) -> List[str]:
        return [b.to_dsl() for b in basis]


class InvarianceResiduals(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_samples: int
    max_volatility_residual: float
    max_drift_residual: float


@dataclass(frozen=True, eq=False)
class Foliation:
    """Leaves psi(t) + V along a noiseless path psi."""

    times: np.ndarray
    psi: np.ndarray
    basis: Tuple[ExpPoly, ...]
    config: CurveSpaceConfig

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def leaf_point(self, k: int) -> ForwardCurve:
        return ForwardCurve(self.psi[k], self.config)

    def basis_values(self) -> np.ndarray:
        if not self.basis:
            return np.zeros((0, self.config.n_grid))
        return np.stack([b.evaluate(self.config.grid) for b in self.basis])


def _numerical_rank(matrix: np.ndarray) -> Tuple[int, np.ndarray]:
    singular = np.linalg.svd(np.atleast_2d(matrix), compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0, singular
    return int(np.sum(singular >= numerics_config.rank_rtol * singular[0])), singular


# ---------------------------------------------------------------------------
# Existence
# ---------------------------------------------------------------------------


def _value_at_zero(f: ExpPoly) -> float:
    return f.value_at(0.0)


def _constant_on_leaves(phi, basis: Sequence[ExpPoly]) -> bool:
    if isinstance(phi, ConstantPhi):
        return True
    # Phi reads h(0) only, so it is constant on h0 + V iff every v(0) vanishes.
    tol = numerics_config.span_tol
    return all(abs(_value_at_zero(v)) <= tol for v in basis)


def check_sufficient(spec: ModelSpec) -> RealizationReport:
    """Decide existence of an affine realization generated by the derivative span."""
    diagnostics = validate(spec)
    lams = [term.lam for term in spec.terms]

    tabulated = [i for i, lam in enumerate(lams) if isinstance(lam, TabulatedCurve)]
    if tabulated:
        return RealizationReport(
            exists=False,
            dimension=0,
            reason=f"σ not quasi-exponential: tabulated direction in term(s) {tabulated}",
            reason_code="not_quasi_exponential",
            flags={"quasi_exponential": False},
            diagnostics=diagnostics,
        )

    if all(lam.is_zero for lam in lams):
        return RealizationReport(
            exists=False,
            dimension=0,
            reason="volatility vanishes identically; the curve dynamics are deterministic",
            reason_code="zero_volatility",
            flags={"quasi_exponential": True, "phi_constant_on_leaves": True},
            diagnostics=diagnostics,
        )

    basis = tuple(realization_space(lams))
    beta_prime = spec.space.beta_prime
    flags = {
        "quasi_exponential": True,
        "phi_constant_on_leaves": all(_constant_on_leaves(t.phi, basis) for t in spec.terms),
        "decay": all(decay_check(lam, beta_prime) for lam in lams if not lam.is_zero),
    }

    if not flags["phi_constant_on_leaves"]:
        reason = "Φ not constant on h₀+V"
        if any(isinstance(t.phi, SigmoidShortRatePhi) for t in spec.terms):
            if jump_mass(spec.levy) > 0.0:
                reason += "; with jumps, short-rate dependent volatility admits an affine realization only if constant"
            else:
                reason += "; the driver has no jumps, so the jump obstruction does not apply and this check is conservative"
        return RealizationReport(
            exists=False,
            dimension=len(basis),
            basis=basis,
            reason=reason,
            reason_code="phi_not_constant_on_leaves",
            flags=flags,
            diagnostics=diagnostics,
        )

    logger.debug(f"realization exists with dimension {len(basis)}")
    return RealizationReport(
        exists=True,
        dimension=len(basis),
        basis=basis,
        reason=f"quasi-exponential directions with Φ constant on leaves: realization of dimension {len(basis)}",
        reason_code="sufficient",
        flags=flags,
        diagnostics=diagnostics,
    )


def _zero_prefix(values: np.ndarray, dx: float) -> Optional[float]:
    """Length of the initial stretch on which a sampled curve vanishes."""
    scale = np.max(np.abs(values))
    if scale == 0.0:
        return dx * (values.size - 1)
    nonzero = np.flatnonzero(np.abs(values) > 1e-14 * scale)
    first = int(nonzero[0])
    return dx * (first - 1) if first >= 2 else None


def check_necessary(
    spec: ModelSpec, basis: Sequence[ExpPoly], h0: Optional[ForwardCurve] = None
) -> NecessaryConditions:
    """Report the moment and non-vanishing hypotheses of the jump obstruction."""
    if not basis:
        raise ValueError("check_necessary needs a nonempty basis")

    config = spec.curve_config()
    model = spec.levy
    notes: List[str] = []

    n0 = moment_nonvanishing_index(model, MOMENT_SCAN_ORDER)
    if n0 is None:
        notes.append("no index n0 with nonvanishing moments: the moment-based obstruction is not applicable")

    zero_prefix = [_zero_prefix(b.evaluate(config.grid), config.dx) for b in basis]
    nonvanishing = all(z is None for z in zero_prefix)
    if not nonvanishing:
        notes.append("a basis element vanishes on an initial interval [0, kappa]")

    constant_direction = spec.p == 1
    jumps = jump_mass(model) > 0.0
    if constant_direction:
        notes.append(
            "constant direction: the moment condition is replaced by F(R) != 0, which "
            + ("holds" if jumps else "fails")
        )

    h0 = h0 or spec.initial_forward_curve(config)
    vol = VolatilityStructure(spec, config)
    base = vol.weights(np.array([h0.values[0]]))
    shifted = vol.weights(np.array([h0.values[0] + s * _value_at_zero(b) for b in basis for s in (-1.0, 1.0)]))
    varies = bool(np.max(np.abs(shifted - base)) > numerics_config.span_tol)
    if varies and jumps:
        notes.append("σ varies along V while F(R) != 0: no affine realization generated by V")

    applicable = (n0 is not None and nonvanishing) or (constant_direction and jumps)
    return NecessaryConditions(
        n0=n0,
        moment_condition=n0 is not None,
        zero_prefix=zero_prefix,
        nonvanishing_condition=nonvanishing,
        constant_direction=constant_direction,
        jump_measure_nonzero=jumps,
        sigma_varies_on_leaf=varies,
        applicable=applicable,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Foliation
# ---------------------------------------------------------------------------


def build_foliation(spec: ModelSpec, h0: ForwardCurve, horizon: float, n_steps: int) -> Foliation:
    """Leaf path psi from h0 by the noiseless splitting scheme."""
    report = check_sufficient(spec)
    if not report.exists and report.reason_code != "zero_volatility":
        raise NoRealization(f"no affine realization: {report.reason}")
    if horizon <= 0 or n_steps < 1:
        raise ValueError(f"need horizon > 0 and n_steps >= 1, got {horizon}, {n_steps}")

    vol = VolatilityStructure(spec, h0.config)
    psi = psi_path(vol, spec.levy, h0.values, horizon / n_steps, n_steps)
    return Foliation(
        times=np.linspace(0.0, horizon, n_steps + 1),
        psi=psi,
        basis=tuple(report.basis),
        config=h0.config,
    )


def _interior_points(config: CurveSpaceConfig, horizon: float) -> int:
    """Grid nodes unaffected by flat extrapolation at x_max over ``horizon``."""
    cut = int(math.ceil(horizon / config.dx)) + 1
    return max(16, config.n_grid - cut)


def foliation_residual(sim: SimulationResult, fol: Foliation) -> np.ndarray:
    """H_beta distance of r_t - psi(t) from V at every time of the path."""
    if sim.values.shape != fol.psi.shape or not np.allclose(sim.times, fol.times):
        raise ValueError("simulation and foliation are not on the same time and space grids")

    n_keep = _interior_points(fol.config, float(fol.times[-1]))
    basis = [c.truncate(n_keep) for c in basis_curves(fol.basis, fol.config)]
    residuals = np.empty(len(fol.times))
    for k in range(len(fol.times)):
        gap = ForwardCurve(sim.values[k] - fol.psi[k], fol.config).truncate(n_keep)
        residuals[k] = project_onto(gap, basis).residual_norm
    return residuals


def invariance_residuals(
    spec: ModelSpec, fol: Foliation, n_samples: int, rng: np.random.Generator
) -> InvarianceResiduals:
    """Relative residuals of sigma(h) in V and of drift tangency along leaves.

    For h = psi(t) + v the curves sigma(h) and
    d/dx h + alpha(h) - (d/dx psi(t) + alpha(psi(t))) must lie in V.
    """
    if fol.dimension == 0:
        raise ValueError("invariance residuals need a nonempty basis")

    config = fol.config
    vol = VolatilityStructure(spec, config)
    n_keep = _interior_points(config, float(fol.times[-1]))
    basis_values = fol.basis_values()
    basis = [ForwardCurve(v, config).truncate(n_keep) for v in basis_values]

    def relative(values: np.ndarray) -> float:
        curve = ForwardCurve(values, config).truncate(n_keep)
        size = norm_beta(curve)
        return 0.0 if size == 0.0 else project_onto(curve, basis).residual_norm / size

    def flow(values: np.ndarray) -> np.ndarray:
        drift = hjm_drift_values(vol.sigma_values(values[None, :]), spec.levy, config.dx)[0]
        return differentiate(ForwardCurve(values, config)).values + drift

    vol_max = drift_max = 0.0
    steps = rng.integers(0, len(fol.times), size=n_samples)
    coords = rng.uniform(-1.0, 1.0, size=(n_samples, fol.dimension))
    for k, c in zip(steps, coords):
        psi = fol.psi[k]
        h = psi + c @ basis_values
        vol_max = max(vol_max, relative(vol.sigma_values(h[None, :])[0]))
        drift_max = max(drift_max, relative(flow(h) - flow(psi)))
    return InvarianceResiduals(
        n_samples=n_samples, max_volatility_residual=vol_max, max_drift_residual=drift_max
    )


@dataclass(frozen=True)
class ShortRateMap:
    """r_t(0) = intercept(t) + slope * Z_t for a one-dimensional realization."""

    intercept: np.ndarray
    slope: float

    def state(self, short_rates: np.ndarray) -> np.ndarray:
        return (np.asarray(short_rates) - self.intercept) / self.slope


def short_rate_state(fol: Foliation, result: Optional[SimulationResult] = None) -> ShortRateMap:
    """Affine map between the state of a 1-d realization and the short rate."""
    if fol.dimension != 1:
        raise ValueError(f"short-rate state needs a one-dimensional realization, got d={fol.dimension}")
    slope = _value_at_zero(fol.basis[0])
    if abs(slope) <= numerics_config.span_tol:
        raise ValueError("basis element vanishes at x = 0; the short rate does not determine the state")
    mapping = ShortRateMap(intercept=fol.psi[:, 0].copy(), slope=slope)
    if result is not None and result.states is not None:
        gap = np.max(np.abs(mapping.state(result.short_rates) - result.states[:, 0]))
        logger.debug(f"short-rate state map reproduces the reduced states to {gap:.3e}")
    return mapping


# ---------------------------------------------------------------------------
# Rank probes
# ---------------------------------------------------------------------------


def _probe_matrix(
    model: LevyModel, Lambda: ForwardCurve, thetas: Sequence[float], sample_xs: Sequence[float]
) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ValueError("rank probe needs at least one theta")
    if np.unique(thetas).size != thetas.size:
        raise ValueError(f"thetas must be pairwise distinct, got {thetas.tolist()}")
    xs = np.asarray(sample_xs, dtype=float)
    if xs.size == 0 or xs.min() < 0.0 or xs.max() > Lambda.config.x_max:
        raise ValueError(f"sample points must lie in [0, {Lambda.config.x_max}]")
    values = np.interp(xs, Lambda.grid, Lambda.values)
    return cumulant(model, np.outer(thetas, values))


def vandermonde_rank_probe(
    model: LevyModel, Lambda: ForwardCurve, thetas: Sequence[float], sample_xs: Sequence[float]
) -> int:
    """Numerical rank of the matrix Psi(theta_i * Lambda(x_j))."""
    rank, singular = _numerical_rank(_probe_matrix(model, Lambda, thetas, sample_xs))
    logger.debug(f"rank probe: m={len(thetas)} rank={rank} smallest singular value {singular[-1]:.3e}")
    return rank


def rank_probe_table(
    model: LevyModel, Lambda: ForwardCurve, thetas: Sequence[float], sample_xs: Sequence[float]
) -> List[RankProbe]:
    """Rank and singular values for every prefix theta_1..theta_m."""
    matrix = _probe_matrix(model, Lambda, thetas, sample_xs)
    table = []
    for m in range(1, matrix.shape[0] + 1):
        rank, singular = _numerical_rank(matrix[:m])
        table.append(RankProbe(m=m, rank=rank, singular_values=singular.tolist()))
    return table


def _short_rate_box(spec: ModelSpec, h0: ForwardCurve) -> Tuple[float, float]:
    """Short-rate window where the leaf samples land: center +- 3 / slope of a sigmoid Phi."""
    for term in spec.terms:
        phi = term.phi
        if isinstance(phi, SigmoidShortRatePhi) and phi.slope != 0.0:
            half = 3.0 / abs(phi.slope)
            return phi.center - half, phi.center + half
    return h0.values[0] - 1.0, h0.values[0] + 1.0


def vpsi_dimension_estimate(
    spec: ModelSpec,
    h0: ForwardCurve,
    m: int,
    rng: np.random.Generator,
    basis: Optional[Sequence[ExpPoly]] = None,
) -> int:
    """Numerical dimension of span{Psi(-int sigma(h0 + v_i)) : i <= m}.

    The v_i are drawn so that their short rates follow a randomly shifted
    van der Corput sequence over the box from ``_short_rate_box``; the
    remaining coordinates are uniform in [-1, 1]. The first k samples do not
    depend on m, so the estimate is non-decreasing in m for a fixed seed.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if basis is None:
        report = check_sufficient(spec)
        if not report.basis:
            raise ValueError(f"no quasi-exponential basis available: {report.reason}")
        basis = report.basis

    config = h0.config
    vol = VolatilityStructure(spec, config)
    basis_values = np.stack([b.evaluate(config.grid) for b in basis])
    at_zero = basis_values[:, 0]

    lo, hi = _short_rate_box(spec, h0)
    shift = rng.uniform()
    points = (qmc.Halton(d=1, scramble=False).random(m)[:, 0] + shift) % 1.0
    targets = lo + (hi - lo) * points
    free = rng.uniform(-1.0, 1.0, size=(m, len(basis)))

    norm0 = float(at_zero @ at_zero)
    if norm0 > 0.0:
        # Split each coordinate vector into its v(0) part and the rest.
        free = free - np.outer(free @ at_zero, at_zero) / norm0
        coords = free + np.outer(targets - h0.values[0], at_zero) / norm0
    else:
        coords = free

    curves = h0.values[None, :] + coords @ basis_values
    z = integral_values(vol.sigma_values(curves), config.dx)
    rank, singular = _numerical_rank(cumulant(spec.levy, z))
    logger.debug(f"V^Psi estimate: m={m} rank={rank}")
    return rank
