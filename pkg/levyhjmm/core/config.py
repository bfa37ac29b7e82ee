"""Configuration loader for the levy-hjmm toolkit."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Tuple

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent.parent


class Config:
    """Runtime settings loaded from environment variables."""

    def __init__(self) -> None:
        """Load configuration from .env file."""
        load_dotenv(PROJECT_ROOT / ".env")

        self.log_level: str = os.getenv("LOG_LEVEL", "INFO")
        self.threads: int = self._read_threads()
        self.out_dir: str = os.getenv("LEVY_HJMM_OUT_DIR", "out")

    @staticmethod
    def _read_threads() -> int:
        raw = os.getenv("LEVY_HJMM_THREADS")
        if raw is None or raw == "":
            return max(1, os.cpu_count() or 1)
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"LEVY_HJMM_THREADS={raw!r} is not an integer, using 1")
            return 1

    def reload(self) -> None:
        """Re-read environment variables."""
        self.__init__()

    def __repr__(self) -> str:
        """Return string representation of config."""
        return f"Config(log_level={self.log_level}, threads={self.threads}, out_dir={self.out_dir})"


class NumericsConfig:
    """Numerical tolerances and grid defaults, loaded once from JSON."""

    _instance = None
    _config: Dict[str, Any] = {}

    def __new__(cls):
        """Singleton pattern to ensure config is loaded once."""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._load_config()
        return cls._instance

    def _load_config(self) -> None:
        """Load numerics configuration from JSON file."""
        config_path = PROJECT_ROOT / "data" / "config" / "numerics.json"

        if not config_path.exists():
            logger.warning(f"Numerics config not found at {config_path}, using defaults")
            self._config = self._get_default_config()
            return

        try:
            with open(config_path) as f:
                loaded = json.load(f)
            self._config = {**self._get_default_config(), **loaded}
            logger.debug(f"Loaded numerics configuration from {config_path}")
        except (json.JSONDecodeError, OSError) as e:
            logger.error(f"Failed to load numerics config: {e}, using defaults")
            self._config = self._get_default_config()

    def _get_default_config(self) -> Dict[str, Any]:
        """Return default configuration if file not found."""
        return {
            "version": "1",
            "rank_rtol": 1e-8,
            "gram_condition_max": 1e12,
            "tail_tolerance": 1e-8,
            "overflow_guard": 1e8,
            "quadrature_nodes": 256,
            "quadrature_tail_mass": 1e-12,
            "moment_rtol": 1e-10,
            "span_tol": 1e-10,
            "default_k": [-0.5, 0.5],
            "default_x_max": 20.0,
            "default_n_grid": 512,
            "series_tol": 1e-8,
        }

    @property
    def rank_rtol(self) -> float:
        """Relative singular-value threshold for numerical rank."""
        return float(self._config["rank_rtol"])

    @property
    def gram_condition_max(self) -> float:
        """Largest Gram condition number accepted by projections."""
        return float(self._config["gram_condition_max"])

    @property
    def tail_tolerance(self) -> float:
        """Absolute bound on |h| over the last decile for the decay test."""
        return float(self._config["tail_tolerance"])

    @property
    def overflow_guard(self) -> float:
        """Largest curve value tolerated by the simulators."""
        return float(self._config["overflow_guard"])

    @property
    def quadrature_nodes(self) -> int:
        """Gauss-Legendre node count for Lévy-measure integrals."""
        return int(self._config["quadrature_nodes"])

    @property
    def quadrature_tail_mass(self) -> float:
        """Tail mass at which quadrature supports are truncated."""
        return float(self._config["quadrature_tail_mass"])

    @property
    def moment_rtol(self) -> float:
        """Relative tolerance for calling a moment nonzero."""
        return float(self._config["moment_rtol"])

    @property
    def span_tol(self) -> float:
        """Relative tolerance for linear dependence in coefficient space."""
        return float(self._config["span_tol"])

    @property
    def default_k(self) -> Tuple[float, float]:
        """Default cumulant interval K."""
        lo, hi = self._config["default_k"]
        return float(lo), float(hi)

    @property
    def default_x_max(self) -> float:
        return float(self._config["default_x_max"])

    @property
    def default_n_grid(self) -> int:
        return int(self._config["default_n_grid"])

    @property
    def series_tol(self) -> float:
        """Relative tail tolerance for series stabilization checks."""
        return float(self._config["series_tol"])

    def reload(self) -> None:
        """Reload configuration from disk."""
        self._load_config()


# Global config instances
config = Config()
numerics_config = NumericsConfig()
