"""
Absolutely convergent series: product sums, the Weierstrass criterion and
multivariate power series with a certified geometric tail bound.

For a series sum_k c_k (z - a)^k known to converge at a witness point x with
|x_i - a_i| > 0, every term at a point z with ||z - a|| <= r is bounded by
M * Theta^k, where Theta_i = r / |x_i - a_i| and M bounds the witness terms.
Summing that bound over all multi-indices of total degree > N gives the tail
bound returned by ``multivariate_eval``.
"""

import itertools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from levyhjmm.core.config import numerics_config
from levyhjmm.core.errors import DivergenceWarning, RadiusError

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]

MAX_TAIL_TERMS = 1_000_000


@dataclass(frozen=True)
class ProductSum:
    value: float
    double_sum: float
    difference: float


def _tail_share(terms: np.ndarray) -> float:
    """Mass of the last tenth of |terms| relative to the whole."""
    n_tail = terms.size // 10
    if n_tail == 0:
        return 0.0
    total = math.fsum(np.abs(terms))
    return math.fsum(np.abs(terms[-n_tail:])) / max(total, 1.0)


def product_series_sum(a_seq: Sequence[float], b_seq: Sequence[float]) -> ProductSum:
    """(sum a_k)(sum b_l), cross-checked against the double sum over all (k, l)."""
    a = np.asarray(a_seq, dtype=float)
    b = np.asarray(b_seq, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("series terms must be finite")

    tol = numerics_config.series_tol
    for name, seq in (("a", a), ("b", b)):
        share = _tail_share(seq)
        if share > tol:
            warnings.warn(
                f"partial sums of {name} have not stabilized (tail share {share:.3e} > {tol:.1e})",
                DivergenceWarning,
                stacklevel=2,
            )

    value = math.fsum(a) * math.fsum(b)
    double_sum = math.fsum(np.outer(a, b).ravel())
    return ProductSum(value=value, double_sum=double_sum, difference=abs(value - double_sum))


def uniform_convergence_bound(term_sup_norms: Sequence[float]) -> bool:
    """Weierstrass test: do the partial sums of sup-norms settle?

    True iff the second half of the given norms contributes at most
    ``series_tol`` of their total.
    """
    norms = np.asarray(term_sup_norms, dtype=float)
    if norms.size == 0:
        return True
    if np.any(norms < 0):
        raise ValueError("sup norms must be nonnegative")
    if not np.all(np.isfinite(norms)):
        return False
    total = math.fsum(norms)
    if total == 0.0:
        return True
    tail = math.fsum(norms[norms.size // 2 :])
    return tail <= numerics_config.series_tol * total


# ---------------------------------------------------------------------------
# Multivariate series
# ---------------------------------------------------------------------------


def graded_indices(p: int, degree: int) -> List[MultiIndex]:
    """Multi-indices of total degree exactly ``degree``, lexicographically descending."""
    if p == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        out.extend((first,) + rest for rest in graded_indices(p - 1, degree - first))
    return out


@dataclass(frozen=True)
class MultiSeries:
    """Truncated power series sum_{|k| <= N} c_k (z - a)^k with a convergence witness."""

    p: int
    coefficients: Dict[MultiIndex, float]
    center: Tuple[float, ...]
    witness: Tuple[float, ...]

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if len(self.center) != self.p or len(self.witness) != self.p:
            raise ValueError(f"center and witness need {self.p} coordinates")
        for k, c in self.coefficients.items():
            if len(k) != self.p or any(int(i) != i or i < 0 for i in k):
                raise ValueError(f"bad multi-index {k} for p={self.p}")
            if not math.isfinite(c):
                raise ValueError(f"coefficient {k} is not finite")
        if any(abs(x - a) == 0.0 for x, a in zip(self.witness, self.center)):
            raise ValueError("witness must differ from the center in every coordinate")

    @classmethod
    def from_function(
        cls,
        coefficient: Callable[[MultiIndex], float],
        p: int,
        N: int,
        center: Optional[Sequence[float]] = None,
        witness: Optional[Sequence[float]] = None,
    ) -> "MultiSeries":
        center = tuple(center) if center is not None else (0.0,) * p
        witness = tuple(witness) if witness is not None else tuple(a + 1.0 for a in center)
        coefficients = {k: float(coefficient(k)) for n in range(N + 1) for k in graded_indices(p, n)}
        return cls(p=p, coefficients=coefficients, center=center, witness=witness)

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.coefficients), default=0)

    def witness_bound(self) -> float:
        """M = max |c_k (x - a)^k| over the stored coefficients."""
        offsets = np.abs(np.subtract(self.witness, self.center))
        return max((abs(c) * float(np.prod(offsets ** np.array(k))) for k, c in self.coefficients.items()), default=0.0)


def graded_bounds(theta: Sequence[float], n_max: int) -> np.ndarray:
    """h_n(Theta) = sum_{|k| = n} Theta^k for n = 0..n_max.

    Complete homogeneous sums by the recursion H_i(n) = H_{i-1}(n) + Theta_i H_i(n-1).
    """
    theta = np.asarray(theta, dtype=float)
    out = np.empty(n_max + 1)
    previous = np.ones(theta.size)
    out[0] = 1.0
    for n in range(1, n_max + 1):
        current = np.empty(theta.size)
        running = 0.0
        for i, t in enumerate(theta):
            running = running + t * previous[i]
            current[i] = running
        out[n] = current[-1]
        previous = current
    return out


def geometric_tail(theta: Sequence[float], N: int) -> float:
    """sum over |k| > N of Theta^k, for 0 <= Theta_i < 1."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta >= 1):
        raise RadiusError(f"geometric tail needs 0 <= Theta_i < 1, got {theta.tolist()}")
    if np.all(theta == 0):
        return 0.0

    # h_n ~ n^{p-1} t^n with t = max Theta; run past the peak until the terms are negligible.
    t = float(theta.max())
    p = theta.size
    n_end = N + 1
    while n_end < MAX_TAIL_TERMS:
        log_term = (p - 1) * math.log(n_end + p) + n_end * math.log(t)
        if n_end > (p - 1) / max(-math.log(t), 1e-300) and log_term < math.log(1e-18):
            break
        n_end *= 2
    h = graded_bounds(theta, min(n_end, MAX_TAIL_TERMS))
    reverse = np.cumsum(h[::-1])[::-1]
    return float(reverse[N + 1]) if N + 1 < reverse.size else 0.0


def multivariate_eval(
    series: MultiSeries, z: Sequence[float], r: float, N: Optional[int] = None
) -> Tuple[float, float]:
    """Value of the series truncated at total degree N and a bound on the rest.

    ``z`` must lie in the closed Euclidean ball of radius r around the center,
    and r must be smaller than every |x_i - a_i|.
    """
    offsets = np.abs(np.subtract(series.witness, series.center))
    if not 0.0 < r < offsets.min():
        raise RadiusError(f"need 0 < r < min |x_i - a_i| = {offsets.min()}, got r={r}")
    dz = np.subtract(z, series.center)
    if dz.shape != (series.p,):
        raise ValueError(f"point must have {series.p} coordinates")
    if np.linalg.norm(dz) > r * (1 + 1e-12):
        raise RadiusError(f"point at distance {np.linalg.norm(dz)} from the center is outside the ball of radius {r}")

    N = series.degree if N is None else N
    terms = []
    for n in range(N + 1):
        for k in graded_indices(series.p, n):
            c = series.coefficients.get(k)
            if c:
                terms.append(c * float(np.prod(dz ** np.array(k))))
    value = math.fsum(terms)

    theta = r / offsets
    tail = series.witness_bound() * geometric_tail(theta, N)
    return value, tail


def series_demo_table(N_values: Sequence[int], p: int = 2) -> List[Dict[str, float]]:
    """Convergence of sum_k (z - a)^k at z = (1/2, ..., 1/2) towards 2^p."""
    if not 1 <= p <= 3:
        raise ValueError(f"demo series needs 1 <= p <= 3, got {p}")
    z = (0.5,) * p
    r = math.sqrt(p) * 0.5
    witness = (0.5 * (r + 1.0),) * p
    exact = 2.0**p
    rows = []
    for n in N_values:
        series = MultiSeries.from_function(lambda k: 1.0, p=p, N=n, witness=witness)
        value, tail = multivariate_eval(series, z, r)
        bounds = series.witness_bound() * graded_bounds(np.full(p, r / witness[0]), max(2 * n, 1))
        rows.append(
            {
                "N": n,
                "value": value,
                "exact": exact,
                "error": abs(exact - value),
                "tail_bound": tail,
                "weierstrass": bool(uniform_convergence_bound(bounds)),
            }
        )
    return rows
