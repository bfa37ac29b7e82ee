"""
Parametric square-integrable Lévy models.

A model is described by its drift ``b``, Gaussian variance rate ``c`` and a
parametric Lévy measure ``F``. The central object is the cumulant
generating function

    Psi(z) = b z + (c/2) z^2 + int (e^{zx} - 1 - zx) F(dx),

which is evaluated in closed form for every supported kind. Gauss-Legendre
quadrature over the jump law is kept as an independent cross-check.

Usage:
    from levyhjmm.core.levy_models import LevyModel, cumulant

    model = LevyModel.compound_poisson(1.0, JumpDistribution.exponential(5.0))
    cumulant(model, 0.3)
"""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import special, stats

from levyhjmm.core.config import numerics_config
from levyhjmm.core.errors import DomainError, MomentError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class LevyKind(str, Enum):
    BROWNIAN = "brownian"
    COMPOUND_POISSON = "compound_poisson"
    MERTON = "merton"
    GAMMA = "gamma"
    BILATERAL_GAMMA = "bilateral_gamma"


class JumpKind(str, Enum):
    POINT_MASS = "point_mass"
    EXPONENTIAL = "exponential"
    NORMAL = "normal"


class JumpDistribution(BaseModel):
    """Jump-size law of a compound Poisson component.

    ``x0`` is the atom of a point mass, ``rate`` the parameter of an
    exponential law on (0, inf), ``mu``/``s`` the mean and standard deviation
    of a normal law.
    """

    model_config = ConfigDict(frozen=True)

    kind: JumpKind
    x0: float = 0.0
    rate: float = 1.0
    mu: float = 0.0
    s: float = 1.0

    @model_validator(mode="after")
    def _check_parameters(self) -> "JumpDistribution":
        for name in ("x0", "rate", "mu", "s"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"jump parameter {name} must be finite")
        if self.kind == JumpKind.POINT_MASS and self.x0 == 0.0:
            raise ValueError("point_mass jumps need x0 != 0 (a Lévy measure has no atom at 0)")
        if self.kind == JumpKind.EXPONENTIAL and self.rate <= 0:
            raise ValueError(f"exponential jump rate must be > 0, got {self.rate}")
        if self.kind == JumpKind.NORMAL and self.s <= 0:
            raise ValueError(f"normal jump standard deviation must be > 0, got {self.s}")
        return self

    @classmethod
    def point_mass(cls, x0: float) -> "JumpDistribution":
        return cls(kind=JumpKind.POINT_MASS, x0=x0)

    @classmethod
    def exponential(cls, rate: float) -> "JumpDistribution":
        return cls(kind=JumpKind.EXPONENTIAL, rate=rate)

    @classmethod
    def normal(cls, mu: float, s: float) -> "JumpDistribution":
        return cls(kind=JumpKind.NORMAL, mu=mu, s=s)

    @property
    def mean(self) -> float:
        if self.kind == JumpKind.POINT_MASS:
            return self.x0
        if self.kind == JumpKind.EXPONENTIAL:
            return 1.0 / self.rate
        return self.mu

    @property
    def upper_bound(self) -> float:
        """Supremum of z for which the moment generating function is finite."""
        return self.rate if self.kind == JumpKind.EXPONENTIAL else math.inf

    def centered_mgf(self, z: np.ndarray) -> np.ndarray:
        """E[e^{zY}] - 1 - z E[Y], written to avoid cancellation near 0."""
        if self.kind == JumpKind.POINT_MASS:
            return np.expm1(z * self.x0) - z * self.x0
        if self.kind == JumpKind.EXPONENTIAL:
            return z * z / (self.rate * (self.rate - z))
        return np.expm1(self.mu * z + 0.5 * self.s**2 * z * z) - z * self.mu

    def centered_mgf_prime(self, z: np.ndarray) -> np.ndarray:
        """E[Y e^{zY}] - E[Y]."""
        if self.kind == JumpKind.POINT_MASS:
            return self.x0 * np.expm1(z * self.x0)
        if self.kind == JumpKind.EXPONENTIAL:
            return self.rate / (self.rate - z) ** 2 - 1.0 / self.rate
        exponent = self.mu * z + 0.5 * self.s**2 * z * z
        return (self.mu + self.s**2 * z) * np.exp(exponent) - self.mu

    def mgf_second(self, z: np.ndarray) -> np.ndarray:
        """E[Y^2 e^{zY}]."""
        if self.kind == JumpKind.POINT_MASS:
            return self.x0**2 * np.exp(z * self.x0)
        if self.kind == JumpKind.EXPONENTIAL:
            return 2.0 * self.rate / (self.rate - z) ** 3
        exponent = self.mu * z + 0.5 * self.s**2 * z * z
        return ((self.mu + self.s**2 * z) ** 2 + self.s**2) * np.exp(exponent)

    def moment(self, n: int) -> float:
        if self.kind == JumpKind.POINT_MASS:
            return self.x0**n
        if self.kind == JumpKind.EXPONENTIAL:
            return math.factorial(n) / self.rate**n
        return float(stats.norm(loc=self.mu, scale=self.s).moment(n))

    def abs_moment(self, n: int) -> float:
        if self.kind == JumpKind.POINT_MASS:
            return abs(self.x0) ** n
        if self.kind == JumpKind.EXPONENTIAL:
            return math.factorial(n) / self.rate**n
        # E|Y|^n for Y ~ N(mu, s^2) via the confluent hypergeometric function
        base = self.s**n * 2.0 ** (n / 2) * math.gamma((n + 1) / 2) / math.sqrt(math.pi)
        return float(base * special.hyp1f1(-n / 2, 0.5, -(self.mu**2) / (2 * self.s**2)))

    def to_dsl(self) -> str:
        if self.kind == JumpKind.POINT_MASS:
            return f"point_mass(x0 = {self.x0!r})"
        if self.kind == JumpKind.EXPONENTIAL:
            return f"exponential(rate = {self.rate!r})"
        return f"normal(mu = {self.mu!r}, s = {self.s!r})"


class LevyModel(BaseModel):
    """A square-integrable Lévy process under the pricing measure.

    For gamma kinds ``shape``/``rate`` parametrize the (positive-side) Lévy
    density shape * x^{-1} e^{-rate x}; ``shape_minus``/``rate_minus`` give the
    negative side of a bilateral gamma process.
    """

    model_config = ConfigDict(frozen=True)

    kind: LevyKind
    b: float = 0.0
    c: float = Field(default=0.0, ge=0.0)
    intensity: float = Field(default=0.0, ge=0.0)
    jumps: Optional[JumpDistribution] = None
    shape: float = 0.0
    rate: float = 0.0
    shape_minus: float = 0.0
    rate_minus: float = 0.0

    @model_validator(mode="after")
    def _check_kind(self) -> "LevyModel":
        for name in ("b", "c", "intensity", "shape", "rate", "shape_minus", "rate_minus"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

        if self.kind == LevyKind.BROWNIAN:
            if self.intensity != 0.0 or self.jumps is not None:
                raise ValueError("brownian models carry no jump component")
            if self.c <= 0.0:
                raise ValueError("brownian model needs c > 0 (c + F(R) > 0)")
        elif self.kind in (LevyKind.COMPOUND_POISSON, LevyKind.MERTON):
            if self.jumps is None:
                raise ValueError(f"{self.kind.value} model needs a jump distribution")
            if self.kind == LevyKind.MERTON and self.jumps.kind != JumpKind.NORMAL:
                raise ValueError("merton model needs normal jumps")
            if self.c + self.intensity <= 0.0:
                raise ValueError("c + F(R) must be > 0")
        elif self.kind == LevyKind.GAMMA:
            if self.shape <= 0.0 or self.rate <= 0.0:
                raise ValueError("gamma model needs shape > 0 and rate > 0")
        elif self.kind == LevyKind.BILATERAL_GAMMA:
            if min(self.shape, self.rate, self.shape_minus, self.rate_minus) <= 0.0:
                raise ValueError("bilateral_gamma model needs all shapes and rates > 0")
        return self

    @classmethod
    def brownian(cls, b: float = 0.0, c: float = 1.0) -> "LevyModel":
        return cls(kind=LevyKind.BROWNIAN, b=b, c=c)

    @classmethod
    def compound_poisson(
        cls, intensity: float, jumps: JumpDistribution, b: float = 0.0, c: float = 0.0
    ) -> "LevyModel":
        return cls(kind=LevyKind.COMPOUND_POISSON, b=b, c=c, intensity=intensity, jumps=jumps)

    @classmethod
    def merton(cls, intensity: float, mu: float, s: float, b: float = 0.0, c: float = 0.0) -> "LevyModel":
        return cls(kind=LevyKind.MERTON, b=b, c=c, intensity=intensity, jumps=JumpDistribution.normal(mu, s))

    @classmethod
    def gamma(cls, shape: float, rate: float, b: float = 0.0, c: float = 0.0) -> "LevyModel":
        return cls(kind=LevyKind.GAMMA, b=b, c=c, shape=shape, rate=rate)

    @classmethod
    def bilateral_gamma(
        cls,
        shape_plus: float,
        rate_plus: float,
        shape_minus: float,
        rate_minus: float,
        b: float = 0.0,
        c: float = 0.0,
    ) -> "LevyModel":
        return cls(
            kind=LevyKind.BILATERAL_GAMMA,
            b=b,
            c=c,
            shape=shape_plus,
            rate=rate_plus,
            shape_minus=shape_minus,
            rate_minus=rate_minus,
        )

    @property
    def has_compound_jumps(self) -> bool:
        return self.kind in (LevyKind.COMPOUND_POISSON, LevyKind.MERTON) and self.intensity > 0.0


class CumulantSeries(BaseModel):
    """Taylor coefficients a_0..a_N of the cumulant at zero.

    ``radius`` is the distance from 0 to the boundary of the cumulant domain,
    a lower bound for the radius of convergence (inf for entire cumulants).
    """

    model_config = ConfigDict(frozen=True)

    coefficients: Tuple[float, ...]
    radius: float = Field(gt=0.0)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def partial_sum(self, z: float, n: Optional[int] = None) -> float:
        """Sum a_k z^k for k <= n (default: all stored coefficients)."""
        n = self.order if n is None else min(n, self.order)
        return float(np.polynomial.polynomial.polyval(z, self.coefficients[: n + 1]))


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


def domain_bounds(model: LevyModel) -> Tuple[float, float]:
    """Open interval forming the cumulant domain of ``model``."""
    if model.kind in (LevyKind.COMPOUND_POISSON, LevyKind.MERTON) and model.intensity > 0.0:
        return -math.inf, model.jumps.upper_bound
    if model.kind == LevyKind.GAMMA:
        return -math.inf, model.rate
    if model.kind == LevyKind.BILATERAL_GAMMA:
        return -model.rate_minus, model.rate
    return -math.inf, math.inf


def domain_contains(model: LevyModel, interval: Tuple[float, float]) -> bool:
    """True iff both endpoints of ``interval`` lie in the cumulant domain."""
    z_lo, z_hi = interval
    if not z_lo <= 0.0 <= z_hi:
        raise ValueError(f"interval [{z_lo}, {z_hi}] must contain 0")
    lower, upper = domain_bounds(model)
    return lower < z_lo and z_hi < upper


def _require_domain(model: LevyModel, z: np.ndarray) -> None:
    lower, upper = domain_bounds(model)
    if z.size == 0:
        return
    z_min, z_max = float(np.min(z)), float(np.max(z))
    if not (np.all(np.isfinite(z)) and lower < z_min and z_max < upper):
        bad = z_max if z_max >= upper or not math.isfinite(z_max) else z_min
        raise DomainError(f"z={bad!r} outside cumulant domain ({lower}, {upper}) of {model.kind.value} model")


def _as_array(z: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    return arr, arr.ndim == 0


def _gamma_side(shape: float, rate: float, z: np.ndarray) -> np.ndarray:
    """int (e^{zx} - 1 - zx) shape x^{-1} e^{-rate x} dx over x > 0."""
    u = z / rate
    return -shape * (np.log1p(-u) + u)


# ---------------------------------------------------------------------------
# Cumulant and derivatives
# ---------------------------------------------------------------------------


def cumulant(model: LevyModel, z: ArrayLike) -> ArrayLike:
    """Cumulant generating function Psi(z); accepts scalars or arrays."""
    arr, scalar = _as_array(z)
    _require_domain(model, arr)

    value = model.b * arr + 0.5 * model.c * arr * arr
    if model.has_compound_jumps:
        value = value + model.intensity * model.jumps.centered_mgf(arr)
    elif model.kind == LevyKind.GAMMA:
        value = value + _gamma_side(model.shape, model.rate, arr)
    elif model.kind == LevyKind.BILATERAL_GAMMA:
        value = value + _gamma_side(model.shape, model.rate, arr) + _gamma_side(model.shape_minus, model.rate_minus, -arr)
    return float(value) if scalar else value


def cumulant_derivative(model: LevyModel, z: ArrayLike) -> ArrayLike:
    """Psi'(z) = b + cz + int x (e^{zx} - 1) F(dx)."""
    arr, scalar = _as_array(z)
    _require_domain(model, arr)

    value = model.b + model.c * arr
    if model.has_compound_jumps:
        value = value + model.intensity * model.jumps.centered_mgf_prime(arr)
    elif model.kind == LevyKind.GAMMA:
        value = value + model.shape * arr / (model.rate * (model.rate - arr))
    elif model.kind == LevyKind.BILATERAL_GAMMA:
        value = (
            value
            + model.shape * arr / (model.rate * (model.rate - arr))
            + model.shape_minus * arr / (model.rate_minus * (model.rate_minus + arr))
        )
    value = np.broadcast_to(value, arr.shape)
    return float(value) if scalar else np.array(value)


def cumulant_second_derivative(model: LevyModel, z: ArrayLike) -> ArrayLike:
    """Psi''(z) = c + int x^2 e^{zx} F(dx); nonnegative on the domain."""
    arr, scalar = _as_array(z)
    _require_domain(model, arr)

    value = model.c + np.zeros_like(arr)
    if model.has_compound_jumps:
        value = value + model.intensity * model.jumps.mgf_second(arr)
    elif model.kind == LevyKind.GAMMA:
        value = value + model.shape / (model.rate - arr) ** 2
    elif model.kind == LevyKind.BILATERAL_GAMMA:
        value = value + model.shape / (model.rate - arr) ** 2 + model.shape_minus / (model.rate_minus + arr) ** 2
    return float(value) if scalar else value


# ---------------------------------------------------------------------------
# Moments of the Lévy measure
# ---------------------------------------------------------------------------


def jump_mass(model: LevyModel) -> float:
    """Total mass F(R) of the Lévy measure."""
    if model.has_compound_jumps:
        return model.intensity
    if model.kind in (LevyKind.GAMMA, LevyKind.BILATERAL_GAMMA):
        return math.inf
    return 0.0


def _gamma_moment(shape: float, rate: float, n: int) -> float:
    return shape * math.factorial(n - 1) / rate**n


def jump_moment(model: LevyModel, n: int) -> float:
    """int x^n F(dx) in closed form, for n >= 1."""
    if n < 1:
        raise ValueError(f"moment order must be >= 1, got {n}")
    try:
        if model.has_compound_jumps:
            value = model.intensity * model.jumps.moment(n)
        elif model.kind == LevyKind.GAMMA:
            value = _gamma_moment(model.shape, model.rate, n)
        elif model.kind == LevyKind.BILATERAL_GAMMA:
            value = _gamma_moment(model.shape, model.rate, n) + (-1) ** n * _gamma_moment(
                model.shape_minus, model.rate_minus, n
            )
        else:
            value = 0.0
    except OverflowError as e:
        raise MomentError(f"moment {n} of {model.kind.value} model overflows: {e}") from e
    if not math.isfinite(value):
        raise MomentError(f"moment {n} of {model.kind.value} model is not finite")
    return float(value)


def jump_abs_moment(model: LevyModel, n: int) -> float:
    """int |x|^n F(dx) in closed form, for n >= 1."""
    if n < 1:
        raise ValueError(f"moment order must be >= 1, got {n}")
    try:
        if model.has_compound_jumps:
            value = model.intensity * model.jumps.abs_moment(n)
        elif model.kind == LevyKind.GAMMA:
            value = _gamma_moment(model.shape, model.rate, n)
        elif model.kind == LevyKind.BILATERAL_GAMMA:
            value = _gamma_moment(model.shape, model.rate, n) + _gamma_moment(model.shape_minus, model.rate_minus, n)
        else:
            value = 0.0
    except OverflowError as e:
        raise MomentError(f"absolute moment {n} of {model.kind.value} model overflows: {e}") from e
    if not math.isfinite(value):
        raise MomentError(f"absolute moment {n} of {model.kind.value} model is not finite")
    return float(value)


def taylor_coefficients(model: LevyModel, N: int) -> CumulantSeries:
    """Taylor coefficients of the cumulant at 0 up to order N."""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")

    coefficients = [0.0, model.b, 0.5 * (model.c + jump_moment(model, 2))]
    for n in range(3, N + 1):
        coefficients.append(jump_moment(model, n) / math.factorial(n))

    lower, upper = domain_bounds(model)
    radius = min(-lower, upper)
    return CumulantSeries(coefficients=tuple(coefficients), radius=radius)


def moment_nonvanishing_index(model: LevyModel, n_max: int) -> Optional[int]:
    """Least n0 such that the moments n0..n_max of F are all nonzero.

    A moment counts as zero when it is below ``moment_rtol`` times the
    matching absolute moment. Returns None unless at least the two highest
    tested moments are nonzero, so a symmetric measure (vanishing odd
    moments) or F = 0 gives None for either parity of n_max.
    """
    if n_max < 3:
        raise ValueError(f"n_max must be >= 3, got {n_max}")

    rtol = numerics_config.moment_rtol
    n0: Optional[int] = None
    for n in range(n_max, 0, -1):
        scale = jump_abs_moment(model, n)
        if scale == 0.0 or abs(jump_moment(model, n)) <= rtol * scale:
            break
        n0 = n
    if n0 is not None and n0 > n_max - 1:
        return None
    return n0


# ---------------------------------------------------------------------------
# Quadrature cross-checks
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _legendre(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def _gauss_legendre(f, lower: float, upper: float) -> float:
    x, w = _legendre(numerics_config.quadrature_nodes)
    half = 0.5 * (upper - lower)
    points = lower + half * (x + 1.0)
    return float(half * np.sum(w * f(points)))


def _jump_integral(model: LevyModel, integrand, tilt: float = 0.0, order: int = 0) -> float:
    """Integrate integrand(x) against F by Gauss-Legendre on its effective support.

    ``tilt`` is the exponential rate the integrand may grow with and ``order``
    the polynomial degree it carries; both widen the truncated support.
    """
    log_tail = -math.log(numerics_config.quadrature_tail_mass)

    if model.has_compound_jumps:
        jumps = model.jumps
        if jumps.kind == JumpKind.POINT_MASS:
            return float(model.intensity * integrand(np.array([jumps.x0]))[0])
        if jumps.kind == JumpKind.EXPONENTIAL:
            decay = jumps.rate - max(tilt, 0.0)
            upper = (log_tail + order * math.log(order + 2.0) + order) / decay

            def density(x: np.ndarray) -> np.ndarray:
                return jumps.rate * np.exp(-jumps.rate * x)

            return model.intensity * _gauss_legendre(lambda x: integrand(x) * density(x), 0.0, upper)
        shifted = jumps.mu + tilt * jumps.s**2
        width = (math.sqrt(2.0 * log_tail) + 2.0 * math.sqrt(order)) * jumps.s
        lower = min(jumps.mu, shifted) - width
        upper = max(jumps.mu, shifted) + width
        law = stats.norm(loc=jumps.mu, scale=jumps.s)
        return model.intensity * _gauss_legendre(lambda x: integrand(x) * law.pdf(x), lower, upper)

    def gamma_side(shape: float, rate: float, sign: float) -> float:
        decay = rate - max(sign * tilt, 0.0)
        upper = (log_tail + order * math.log(order + 2.0) + order) / decay

        def weighted(y: np.ndarray) -> np.ndarray:
            return integrand(sign * y) / y * shape * np.exp(-rate * y)

        return _gauss_legendre(weighted, 0.0, upper)

    if model.kind == LevyKind.GAMMA:
        return gamma_side(model.shape, model.rate, 1.0)
    if model.kind == LevyKind.BILATERAL_GAMMA:
        return gamma_side(model.shape, model.rate, 1.0) + gamma_side(model.shape_minus, model.rate_minus, -1.0)
    return 0.0


def cumulant_quadrature(model: LevyModel, z: float) -> float:
    """Cumulant with the jump integral computed by quadrature."""
    _require_domain(model, np.asarray([z], dtype=float))
    jump_part = _jump_integral(model, lambda x: np.expm1(z * x) - z * x, tilt=z, order=2)
    return model.b * z + 0.5 * model.c * z * z + jump_part


def jump_moment_quadrature(model: LevyModel, n: int) -> float:
    """int x^n F(dx) by quadrature."""
    return _jump_integral(model, lambda x: x**n, order=n)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Independent random stream for one Monte Carlo path."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(path_index,)))


def draw_increments(model: LevyModel, dt: float, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws of n_steps independent increments X_{t+dt} - X_t."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")

    if model.c > 0.0:
        increments = rng.normal(model.b * dt, math.sqrt(model.c * dt), size=n_steps)
    else:
        increments = np.full(n_steps, model.b * dt)

    if model.has_compound_jumps:
        jumps = model.jumps
        counts = rng.poisson(model.intensity * dt, size=n_steps)
        if jumps.kind == JumpKind.POINT_MASS:
            total = counts * jumps.x0
        elif jumps.kind == JumpKind.EXPONENTIAL:
            total = rng.gamma(shape=counts, scale=1.0 / jumps.rate)
        else:
            total = counts * jumps.mu + np.sqrt(counts) * jumps.s * rng.standard_normal(n_steps)
        increments = increments + total - model.intensity * dt * jumps.mean
    elif model.kind == LevyKind.GAMMA:
        gains = rng.gamma(shape=model.shape * dt, scale=1.0 / model.rate, size=n_steps)
        increments = increments + gains - model.shape * dt / model.rate
    elif model.kind == LevyKind.BILATERAL_GAMMA:
        gains = rng.gamma(shape=model.shape * dt, scale=1.0 / model.rate, size=n_steps)
        losses = rng.gamma(shape=model.shape_minus * dt, scale=1.0 / model.rate_minus, size=n_steps)
        drift = (model.shape / model.rate - model.shape_minus / model.rate_minus) * dt
        increments = increments + gains - losses - drift
    return increments


def sample_increment(model: LevyModel, dt: float, rng: np.random.Generator) -> float:
    """One exact draw of X_{t+dt} - X_t."""
    return float(draw_increments(model, dt, 1, rng)[0])


def to_dsl_pairs(model: LevyModel) -> Tuple[Tuple[str, str], ...]:
    """Key/value pairs of the ``levy { ... }`` block describing ``model``."""
    pairs = [("kind", model.kind.value), ("b", repr(model.b)), ("c", repr(model.c))]
    if model.kind in (LevyKind.COMPOUND_POISSON, LevyKind.MERTON):
        pairs.append(("intensity", repr(model.intensity)))
        pairs.append(("jumps", model.jumps.to_dsl()))
    elif model.kind == LevyKind.GAMMA:
        pairs += [("shape", repr(model.shape)), ("rate", repr(model.rate))]
    elif model.kind == LevyKind.BILATERAL_GAMMA:
        pairs += [
            ("shape_plus", repr(model.shape)),
            ("rate_plus", repr(model.rate)),
            ("shape_minus", repr(model.shape_minus)),
            ("rate_minus", repr(model.rate_minus)),
        ]
    return tuple(pairs)
