"""
Exact algebra of exponential-polynomial-trigonometric functions.

An ExpPoly is a finite sum of terms rho * x^k * e^{-theta x} * trig(omega x)
with trig in {cos, sin}. The class is closed under d/dx, and every
derivative of a term only involves monomials with the same (theta, omega)
and lower or equal degree. Rank questions are therefore decided exactly in
coefficient space over that finite monomial set instead of on a grid.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from levyhjmm.core.config import numerics_config
from levyhjmm.core.curve_space import CurveSpaceConfig, ForwardCurve
from levyhjmm.core.errors import NotInvariant

logger = logging.getLogger(__name__)

PHASES = ("cos", "sin")

# (theta, omega, phase, degree)
MonomialKey = Tuple[float, float, str, int]


@dataclass(frozen=True)
class Term:
    """coeff * x^degree * e^{-rate x} * phase(omega x)."""

    coeff: float
    rate: float = 0.0
    degree: int = 0
    omega: float = 0.0
    phase: str = "cos"

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"phase must be cos or sin, got {self.phase!r}")
        if self.degree < 0 or int(self.degree) != self.degree:
            raise ValueError(f"degree must be a nonnegative integer, got {self.degree}")
        for name in ("coeff", "rate", "omega"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"term {name} must be finite")

    @property
    def key(self) -> MonomialKey:
        return (self.rate, self.omega, self.phase, int(self.degree))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        trig = np.cos if self.phase == "cos" else np.sin
        return self.coeff * np.power(x, self.degree) * np.exp(-self.rate * x) * trig(self.omega * x)

    def derivative_terms(self) -> List["Term"]:
        """Product rule on the three factors."""
        out = []
        if self.degree > 0:
            out.append(Term(self.coeff * self.degree, self.rate, self.degree - 1, self.omega, self.phase))
        out.append(Term(-self.rate * self.coeff, self.rate, self.degree, self.omega, self.phase))
        if self.omega != 0.0:
            if self.phase == "cos":
                out.append(Term(-self.omega * self.coeff, self.rate, self.degree, self.omega, "sin"))
            else:
                out.append(Term(self.omega * self.coeff, self.rate, self.degree, self.omega, "cos"))
        return out

    def to_dsl(self) -> str:
        return (
            f"exp_poly(rho = {self.coeff!r}, theta = {self.rate!r}, degree = {int(self.degree)}, "
            f"omega = {self.omega!r}, phase = {self.phase})"
        )


def _canonical_key(term: Term) -> Tuple[MonomialKey, float]:
    """Fold negative frequencies into omega >= 0 and return (key, coeff)."""
    coeff, omega, phase = term.coeff, term.omega, term.phase
    if omega < 0:
        omega = -omega
        if phase == "sin":
            coeff = -coeff
    if omega == 0.0 and phase == "sin":
        coeff = 0.0
    return (term.rate, omega, phase, int(term.degree)), coeff


@dataclass(frozen=True)
class ExpPoly:
    """Canonical sum of exponential-polynomial-trig terms."""

    terms: Tuple[Term, ...] = ()

    @classmethod
    def from_terms(cls, terms: Iterable[Term]) -> "ExpPoly":
        merged: Dict[MonomialKey, float] = {}
        for term in terms:
            key, coeff = _canonical_key(term)
            merged[key] = merged.get(key, 0.0) + coeff

        scale = max((abs(c) for c in merged.values()), default=0.0)
        cutoff = 1e-14 * scale
        kept = [
            Term(coeff, rate, degree, omega, phase)
            for (rate, omega, phase, degree), coeff in sorted(merged.items())
            if coeff != 0.0 and abs(coeff) > cutoff
        ]
        return cls(tuple(kept))

    @classmethod
    def term(
        cls, rho: float, theta: float = 0.0, degree: int = 0, omega: float = 0.0, phase: str = "cos"
    ) -> "ExpPoly":
        return cls.from_terms([Term(rho, theta, degree, omega, phase)])

    @classmethod
    def exponential(cls, rho: float, theta: float) -> "ExpPoly":
        return cls.term(rho, theta)

    @classmethod
    def constant(cls, kappa: float) -> "ExpPoly":
        return cls.term(kappa)

    @classmethod
    def from_vector(cls, keys: Sequence[MonomialKey], vector: np.ndarray) -> "ExpPoly":
        return cls.from_terms(
            Term(float(c), rate, degree, omega, phase) for (rate, omega, phase, degree), c in zip(keys, vector)
        )

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly.from_terms(self.terms + other.terms)

    def __neg__(self) -> "ExpPoly":
        return self * -1.0

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + (-other)

    def __mul__(self, scalar: float) -> "ExpPoly":
        s = float(scalar)
        return ExpPoly.from_terms(Term(t.coeff * s, t.rate, t.degree, t.omega, t.phase) for t in self.terms)

    __rmul__ = __mul__

    def derivative(self) -> "ExpPoly":
        return ExpPoly.from_terms(d for t in self.terms for d in t.derivative_terms())

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for term in self.terms:
            total = total + term.evaluate(x)
        return total

    def value_at(self, x: float) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float)))

    def keys(self) -> List[MonomialKey]:
        return [t.key for t in self.terms]

    def closure_keys(self) -> List[MonomialKey]:
        """Monomials reachable by repeated differentiation."""
        keys = set()
        for t in self.terms:
            phases = PHASES if t.omega > 0 else ("cos",)
            for degree in range(int(t.degree) + 1):
                for phase in phases:
                    keys.add((t.rate, t.omega, phase, degree))
        return sorted(keys)

    def coefficient_vector(self, keys: Sequence[MonomialKey]) -> np.ndarray:
        lookup = {t.key: t.coeff for t in self.terms}
        missing = set(lookup) - set(keys)
        if missing:
            raise ValueError(f"monomials {sorted(missing)} not in the coordinate key set")
        return np.array([lookup.get(k, 0.0) for k in keys])

    def to_dsl(self) -> str:
        if self.is_zero:
            return "exp_poly(rho = 0.0)"
        return " + ".join(t.to_dsl() for t in self.terms)

    def __str__(self) -> str:
        return self.to_dsl()


def derivative(f: ExpPoly) -> ExpPoly:
    """Exact d/dx."""
    return f.derivative()


def _union_keys(functions: Iterable[ExpPoly]) -> List[MonomialKey]:
    keys = set()
    for f in functions:
        keys.update(f.closure_keys())
    return sorted(keys)


def _orthogonalize(vector: np.ndarray, basis: List[np.ndarray]) -> np.ndarray:
    """Classical Gram-Schmidt, applied twice for stability."""
    residual = vector.copy()
    for _ in range(2):
        for q in basis:
            residual = residual - np.dot(q, residual) * q
    return residual


def derivative_span(f: ExpPoly) -> List[ExpPoly]:
    """Basis f, f', ..., f^(d-1) of the span of all derivatives of f."""
    if f.is_zero:
        return []

    keys = f.closure_keys()
    tol = numerics_config.span_tol
    chain: List[ExpPoly] = []
    ortho: List[np.ndarray] = []
    current = f
    for _ in range(len(keys) + 1):
        vector = current.coefficient_vector(keys)
        residual = _orthogonalize(vector, ortho)
        size = np.linalg.norm(residual)
        if size <= tol * np.linalg.norm(vector):
            break
        ortho.append(residual / size)
        chain.append(current)
        current = current.derivative()
    return chain


def realization_space(lams: Sequence[ExpPoly]) -> List[ExpPoly]:
    """Coefficient-orthonormal basis of the sum of derivative spans."""
    if not lams:
        raise ValueError("realization_space needs at least one direction")

    chains = [g for lam in lams for g in derivative_span(lam)]
    keys = _union_keys(chains)
    tol = numerics_config.span_tol
    ortho: List[np.ndarray] = []
    for g in chains:
        vector = g.coefficient_vector(keys)
        residual = _orthogonalize(vector, ortho)
        size = np.linalg.norm(residual)
        if size > tol * np.linalg.norm(vector):
            ortho.append(residual / size)

    logger.debug(f"realization space of {len(lams)} directions has dimension {len(ortho)}")
    return [ExpPoly.from_vector(keys, q) for q in ortho]


def coordinates(f: ExpPoly, basis: Sequence[ExpPoly]) -> Tuple[np.ndarray, float]:
    """Least-squares coordinates of f in ``basis`` and the relative residual."""
    if not basis:
        return np.zeros(0), (0.0 if f.is_zero else 1.0)
    keys = _union_keys(list(basis) + [f])
    matrix = np.column_stack([b.coefficient_vector(keys) for b in basis])
    target = f.coefficient_vector(keys)
    coords, *_ = np.linalg.lstsq(matrix, target, rcond=None)
    scale = np.linalg.norm(target)
    residual = np.linalg.norm(matrix @ coords - target)
    return coords, (residual / scale if scale > 0 else residual)


def shift_matrix(basis: Sequence[ExpPoly]) -> np.ndarray:
    """Matrix D with derivative(v_j) = sum_i D_ij v_i."""
    d = len(basis)
    if d == 0:
        return np.zeros((0, 0))

    tol = numerics_config.span_tol
    matrix = np.zeros((d, d))
    for j, v in enumerate(basis):
        coords, residual = coordinates(v.derivative(), basis)
        if residual > tol:
            raise NotInvariant(f"derivative of basis element {j} leaves the span (relative residual {residual:.3e})")
        matrix[:, j] = coords
    return matrix


def decay_check(f: ExpPoly, beta_prime: float) -> bool:
    """True iff every rate exceeds beta_prime / 2."""
    if f.is_zero:
        raise ValueError("decay_check needs a nonzero ExpPoly")
    return min(t.rate for t in f.terms) > beta_prime / 2.0


def evaluate_on_grid(f: ExpPoly, config: CurveSpaceConfig) -> ForwardCurve:
    return ForwardCurve(f.evaluate(config.grid), config)
