"""
Pytest configuration and shared fixtures for tests.
"""

from pathlib import Path

import numpy as np
import pytest

from levyhjmm.core.curve_space import CurveSpaceConfig
from levyhjmm.core.spec_dsl import load_spec

SPEC_DIR = Path(__file__).parent.parent / "data" / "specs"

# Constant-volatility specs, one per driver family.
CORPUS = ("vasicek", "cp_point_mass", "cp_exponential", "merton", "gamma")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo acceptance runs (still run by default)")


@pytest.fixture
def spec_dir():
    return SPEC_DIR


@pytest.fixture
def load():
    """Load a corpus spec by name, optionally on another grid."""

    def _load(name, x_max=None, n_grid=None):
        spec = load_spec(SPEC_DIR / f"{name}.spec")
        if x_max is not None or n_grid is not None:
            spec = spec.with_grid(x_max=x_max, n_grid=n_grid)
        return spec

    return _load


@pytest.fixture
def space():
    """Curve space with the corpus weights on a coarse grid."""
    return CurveSpaceConfig(beta=0.5, beta_prime=1.0, x_max=20.0, n_grid=257)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def spec_text(
    levy="kind = brownian  b = 0.0  c = 1.0",
    lam="exp_poly(rho = 0.2, theta = 1.0)",
    extra="",
    space="",
    phi="constant(value = 1.0)",
):
    """Source of a one-term spec with the corpus weights."""
    return f"""
version = 1
levy {{ {levy} }}
volatility {{
  term {{
    phi = {phi}
    lambda = {lam}
  }}
}}
space {{ beta = 0.5  beta_prime = 1.0 {space} }}
{extra}
"""
