"""
Discretized forward-curve space H_beta.

Curves live on a uniform grid over [0, x_max]. The weighted norm

    ||h||_beta^2 = |h(0)|^2 + int_0^{x_max} |h'(x)|^2 e^{beta x} dx

is evaluated with second-order finite differences and the trapezoid rule.
The same quadrature defines the inner product used for projections, so the
norm is exactly the one induced by that inner product.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import cumulative_trapezoid, trapezoid

from levyhjmm.core.config import numerics_config
from levyhjmm.core.errors import DegenerateBasis
from levyhjmm.core.store import write_csv

logger = logging.getLogger(__name__)


class CurveSpaceConfig(BaseModel):
    """Weights and grid of the discretized curve space."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(gt=0.0)
    beta_prime: float
    x_max: float = Field(default_factory=lambda: numerics_config.default_x_max, gt=0.0)
    n_grid: int = Field(default_factory=lambda: numerics_config.default_n_grid, ge=16)

    @model_validator(mode="after")
    def _check_ordering(self) -> "CurveSpaceConfig":
        if not self.beta < self.beta_prime:
            raise ValueError(f"need 0 < beta < beta_prime, got beta={self.beta}, beta_prime={self.beta_prime}")
        if not (math.isfinite(self.beta_prime) and math.isfinite(self.x_max)):
            raise ValueError("beta_prime and x_max must be finite")
        return self

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.n_grid)

    @property
    def dx(self) -> float:
        return self.x_max / (self.n_grid - 1)

    def with_grid(self, x_max: Optional[float] = None, n_grid: Optional[int] = None) -> "CurveSpaceConfig":
        """Copy with a different grid, same weights."""
        return self.model_copy(
            update={
                "x_max": self.x_max if x_max is None else x_max,
                "n_grid": self.n_grid if n_grid is None else n_grid,
            }
        )


@dataclass(frozen=True, eq=False)
class ForwardCurve:
    """Forward curve sampled on the grid of ``config``."""

    values: np.ndarray
    config: CurveSpaceConfig = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.config.n_grid,):
            raise ValueError(f"curve has shape {values.shape}, grid has {self.config.n_grid} points")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], config: CurveSpaceConfig) -> "ForwardCurve":
        return cls(np.broadcast_to(f(config.grid), (config.n_grid,)), config)

    @classmethod
    def flat(cls, kappa: float, config: CurveSpaceConfig) -> "ForwardCurve":
        return cls(np.full(config.n_grid, float(kappa)), config)

    @classmethod
    def zeros(cls, config: CurveSpaceConfig) -> "ForwardCurve":
        return cls(np.zeros(config.n_grid), config)

    @property
    def grid(self) -> np.ndarray:
        return self.config.grid

    def _coerce(self, other: "ForwardCurve") -> np.ndarray:
        if other.config != self.config:
            raise ValueError("curves live on different grids")
        return other.values

    def __add__(self, other: "ForwardCurve") -> "ForwardCurve":
        return ForwardCurve(self.values + self._coerce(other), self.config)

    def __sub__(self, other: "ForwardCurve") -> "ForwardCurve":
        return ForwardCurve(self.values - self._coerce(other), self.config)

    def __mul__(self, scalar: float) -> "ForwardCurve":
        return ForwardCurve(self.values * float(scalar), self.config)

    __rmul__ = __mul__

    def __neg__(self) -> "ForwardCurve":
        return ForwardCurve(-self.values, self.config)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def truncate(self, n_points: int) -> "ForwardCurve":
        """Restriction to the first ``n_points`` grid nodes."""
        if not 16 <= n_points <= self.config.n_grid:
            raise ValueError(f"cannot truncate {self.config.n_grid}-point curve to {n_points} points")
        sub = self.config.with_grid(x_max=self.config.dx * (n_points - 1), n_grid=n_points)
        return ForwardCurve(self.values[:n_points], sub)


def _derivative_values(values: np.ndarray, dx: float) -> np.ndarray:
    return np.gradient(values, dx, edge_order=2, axis=-1)


def inner_beta(f: ForwardCurve, g: ForwardCurve, beta: Optional[float] = None) -> float:
    """Inner product f(0)g(0) + int f' g' e^{beta x} dx on the grid."""
    beta = f.config.beta if beta is None else beta
    g_values = f._coerce(g)
    weight = np.exp(beta * f.grid)
    df = _derivative_values(f.values, f.config.dx)
    dg = _derivative_values(g_values, f.config.dx)
    return float(f.values[0] * g_values[0] + trapezoid(df * dg * weight, dx=f.config.dx))


def norm_beta(curve: ForwardCurve, beta: Optional[float] = None) -> float:
    """Weighted H_beta norm of a grid curve."""
    beta = curve.config.beta if beta is None else beta
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return math.sqrt(max(inner_beta(curve, curve, beta), 0.0))


def graph_norm(curve: ForwardCurve, beta: Optional[float] = None) -> float:
    """Norm (||h||^2 + ||h'||^2)^{1/2} of the domain of d/dx."""
    return math.hypot(norm_beta(curve, beta), norm_beta(differentiate(curve), beta))


def in_H0(curve: ForwardCurve) -> bool:
    """Membership test for the decaying subspace H0 under beta_prime."""
    with np.errstate(over="ignore", invalid="ignore"):
        norm = norm_beta(curve, curve.config.beta_prime)
    if not math.isfinite(norm) or norm > numerics_config.overflow_guard:
        return False
    tail_start = int(math.floor(0.9 * curve.config.n_grid))
    tail = np.abs(curve.values[tail_start:])
    return bool(np.max(tail) < numerics_config.tail_tolerance)


class GridShift:
    """Linear-interpolation shift by ``t`` on a fixed grid, flat beyond x_max.

    The interpolation stencil is computed once so the shift can be applied to
    stacks of curves (last axis = grid).
    """

    def __init__(self, config: CurveSpaceConfig, t: float) -> None:
        if t < 0:
            raise ValueError(f"shift must be >= 0, got {t}")
        n = config.n_grid
        position = np.arange(n) + t / config.dx
        snapped = np.rint(position)
        position = np.where(np.abs(position - snapped) < 1e-9, snapped, position)
        left = np.minimum(np.floor(position).astype(int), n - 2)
        self.left = left
        self.weight = np.clip(position - left, 0.0, 1.0)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        left_values = values[..., self.left]
        right_values = values[..., self.left + 1]
        return left_values + self.weight * (right_values - left_values)


def shift(curve: ForwardCurve, t: float) -> ForwardCurve:
    """Shift semigroup S_t h = h(t + .)."""
    return ForwardCurve(GridShift(curve.config, t)(curve.values), curve.config)


def differentiate(curve: ForwardCurve) -> ForwardCurve:
    """d/dx by centered differences, second-order one-sided at the ends."""
    return ForwardCurve(_derivative_values(curve.values, curve.config.dx), curve.config)


def integral_values(values: np.ndarray, dx: float) -> np.ndarray:
    """-int_0^x along the last axis by the cumulative trapezoid rule."""
    return -cumulative_trapezoid(values, dx=dx, axis=-1, initial=0.0)


def integral_operator(lam: ForwardCurve) -> ForwardCurve:
    """T lam = -int_0^. lam(eta) d eta."""
    return ForwardCurve(integral_values(lam.values, lam.config.dx), lam.config)


def short_rate(curve: ForwardCurve) -> float:
    """Evaluation at the short end, h(0)."""
    return float(curve.values[0])


@dataclass(frozen=True)
class Projection:
    coordinates: np.ndarray
    residual_norm: float


def project_onto(curve: ForwardCurve, basis: Sequence[ForwardCurve]) -> Projection:
    """Least-squares projection in the H_beta inner product."""
    if not basis:
        return Projection(np.zeros(0), norm_beta(curve))

    gram = np.array([[inner_beta(u, v) for v in basis] for u in basis])
    condition = np.linalg.cond(gram)
    if not math.isfinite(condition) or condition > numerics_config.gram_condition_max:
        raise DegenerateBasis(f"Gram matrix of {len(basis)} basis curves has condition number {condition:.3e}")

    rhs = np.array([inner_beta(u, curve) for u in basis])
    coordinates = np.linalg.solve(gram, rhs)
    fitted = np.tensordot(coordinates, np.stack([u.values for u in basis]), axes=1)
    residual = ForwardCurve(curve.values - fitted, curve.config)
    return Projection(coordinates, norm_beta(residual))


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def read_curve_csv(path: Union[str, Path], config: CurveSpaceConfig) -> ForwardCurve:
    """Read an ``x,value`` CSV and resample it onto the grid."""
    xs, values = read_curve_table(path)
    return ForwardCurve(np.interp(config.grid, xs, values), config)


def read_curve_table(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Raw (x, value) columns of a curve CSV, sorted by x."""
    frame = pd.read_csv(path)
    if list(frame.columns) != ["x", "value"]:
        raise ValueError(f"{path}: curve CSV needs header 'x,value', got {','.join(map(str, frame.columns))}")
    if frame.empty:
        raise ValueError(f"{path}: curve CSV has no rows")
    frame = frame.astype(float).sort_values("x")
    xs = frame["x"].to_numpy()
    values = frame["value"].to_numpy()
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(values))):
        raise ValueError(f"{path}: curve CSV contains non-finite entries")
    return xs, values


def write_curve_csv(path: Union[str, Path], curve: ForwardCurve) -> None:
    write_csv(path, pd.DataFrame({"x": curve.grid, "value": curve.values}))


def basis_curves(functions: Sequence, config: CurveSpaceConfig) -> List[ForwardCurve]:
    """Sample objects exposing ``evaluate(x)`` on the grid."""
    return [ForwardCurve(f.evaluate(config.grid), config) for f in functions]
