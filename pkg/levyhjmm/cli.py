#!/usr/bin/env python3
# levyhjmm/cli.py: command line for the levy-hjmm toolkit
# Subcommands: check, simulate, price, martingale, rank-probe, moments, series-demo

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import pandas as pd
import pydantic
import scipy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from levyhjmm import __version__
from levyhjmm.core.config import config
from levyhjmm.core.curve_space import integral_operator, norm_beta
from levyhjmm.core.engine import bond_price, martingale_test, simulate_paths, yield_curve
from levyhjmm.core.errors import HJMMError
from levyhjmm.core.levy_models import (
    jump_abs_moment,
    jump_moment,
    jump_moment_quadrature,
    moment_nonvanishing_index,
    path_rng,
    taylor_coefficients,
)
from levyhjmm.core.log_filters import install_run_context
from levyhjmm.core.logging import configure_logging, log_run
from levyhjmm.core.power_series import series_demo_table
from levyhjmm.core.realization import (
    check_necessary,
    check_sufficient,
    rank_probe_table,
    vpsi_dimension_estimate,
)
from levyhjmm.core.spec_dsl import ModelSpec, curve_on_grid, has_errors, load_spec, validate
from levyhjmm.core.store import write_csv, write_json

logger = logging.getLogger(__name__)

USAGE_ERROR = 2


class RunConfig(BaseModel):
    """Validated flags of one CLI invocation."""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    spec: Optional[str] = None
    seed: Optional[int] = None
    stochastic: bool = False
    n_paths: int = Field(default=1, ge=1)
    n_steps: int = Field(default=100, ge=1)
    horizon: float = Field(default=1.0, gt=0.0)
    out: str
    format: Literal["csv", "json"] = "csv"
    grid_points: Optional[int] = Field(default=None, ge=16)
    x_max: Optional[float] = Field(default=None, gt=0.0)
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _seed_for_stochastic(self) -> "RunConfig":
        if self.stochastic and self.seed is None:
            raise ValueError(f"--seed is required for {self.subcommand}")
        return self

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


# --- Helpers: spec loading, tables, manifest ---
def _load(run: RunConfig) -> ModelSpec:
    spec = load_spec(run.spec)
    if run.grid_points is not None or run.x_max is not None:
        spec = spec.with_grid(x_max=run.x_max, n_grid=run.grid_points)
    return spec


def _write_table(run: RunConfig, name: str, frame: pd.DataFrame) -> str:
    if run.format == "csv":
        filename = f"{name}.csv"
        write_csv(run.out_dir / filename, frame)
    else:
        filename = f"{name}.json"
        write_json(run.out_dir / filename, {"columns": list(frame.columns), "rows": frame.to_dict(orient="records")})
    return filename


def _spec_digest(path: Optional[str]) -> Optional[str]:
    if not path:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(run: RunConfig, outputs: List[str], extra: Optional[Dict[str, Any]] = None) -> None:
    manifest = {
        "subcommand": run.subcommand,
        "spec": run.spec,
        "spec_sha256": _spec_digest(run.spec),
        "seed": run.seed,
        "flags": run.model_dump(mode="json", exclude={"threads"}),
        "outputs": sorted(outputs),
        "versions": {
            "levyhjmm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "pydantic": pydantic.VERSION,
        },
    }
    if extra:
        manifest.update(extra)
    write_json(run.out_dir / "manifest.json", manifest)


def _diagnostics_payload(spec: ModelSpec) -> List[Dict[str, Any]]:
    return [d.model_dump(mode="json") for d in validate(spec)]


# --- Subcommands ---
def cmd_check(run: RunConfig, args) -> int:
    spec = _load(run)
    report = check_sufficient(spec)
    valid = not has_errors(report.diagnostics)
    if report.basis and valid:
        report = report.model_copy(update={"necessary": check_necessary(spec, report.basis)})

    payload = report.model_dump(mode="json")
    if valid:
        payload["initial_curve_norm"] = norm_beta(spec.initial_forward_curve())
    write_json(run.out_dir / "report.json", payload)
    _write_manifest(run, ["report.json"])

    print(json.dumps(payload, indent=2, sort_keys=True))
    for d in report.diagnostics:
        if d.severity == "error":
            print(f"error: {d.code}: {d.message}", file=sys.stderr)
    return 1 if has_errors(report.diagnostics) else 0


def cmd_simulate(run: RunConfig, args) -> int:
    spec = _load(run)
    h0 = spec.initial_forward_curve()
    config_ = h0.config
    batch = simulate_paths(
        spec,
        h0,
        run.horizon,
        run.n_steps,
        run.seed,
        run.n_paths,
        args.mode,
        threads=run.threads,
    )

    outputs: List[str] = []
    n_times = batch.times.size
    terminal = {"path": np.arange(run.n_paths)}

    if batch.terminal is not None:
        terminal["short_rate_full"] = batch.terminal[:, 0]
        n_curves = min(args.curves, run.n_paths)
        if n_curves:
            # Per-path streams: the first paths of a smaller batch are the same paths.
            head = simulate_paths(
                spec, h0, run.horizon, run.n_steps, run.seed, n_curves, "full", threads=run.threads, keep_curves=True
            )
            frame = pd.DataFrame(
                {
                    "path": np.repeat(np.arange(n_curves), n_times * config_.n_grid),
                    "t": np.tile(np.repeat(batch.times, config_.n_grid), n_curves),
                    "x": np.tile(config_.grid, n_curves * n_times),
                    "value": head.curves.ravel(),
                }
            )
            outputs.append(_write_table(run, "curves", frame))

    if batch.states is not None:
        d = batch.states.shape[-1]
        frame = pd.DataFrame(
            {
                "path": np.repeat(np.arange(run.n_paths), n_times),
                "t": np.tile(batch.times, run.n_paths),
                **{f"z_{i + 1}": batch.states[:, :, i].ravel() for i in range(d)},
            }
        )
        outputs.append(_write_table(run, "states", frame))
        psi = pd.DataFrame(
            {
                "t": np.repeat(batch.times, config_.n_grid),
                "x": np.tile(config_.grid, n_times),
                "value": batch.psi.ravel(),
            }
        )
        outputs.append(_write_table(run, "psi", psi))
        terminal["short_rate_reduced"] = batch.reduced_terminal[:, 0]

    summary: Dict[str, Any] = {}
    if batch.terminal is not None and batch.reduced_terminal is not None:
        gap = np.max(np.abs(batch.terminal - batch.reduced_terminal), axis=-1)
        terminal["terminal_gap"] = gap
        summary["max_terminal_gap"] = float(gap.max())
    outputs.append(_write_table(run, "terminal", pd.DataFrame(terminal)))

    summary.update(
        {
            "mode": args.mode,
            "seed": run.seed,
            "n_paths": run.n_paths,
            "n_steps": run.n_steps,
            "horizon": run.horizon,
            "dt": run.horizon / run.n_steps,
            "grid": {"x_max": config_.x_max, "n_grid": config_.n_grid, "dx": config_.dx},
            "diagnostics": _diagnostics_payload(spec),
        }
    )
    if batch.basis:
        summary["basis"] = [b.to_dsl() for b in batch.basis]
    write_json(run.out_dir / "summary.json", summary)
    outputs.append("summary.json")
    _write_manifest(run, outputs)

    print(pd.DataFrame(terminal).to_string(index=False))
    return 0


def cmd_price(run: RunConfig, args) -> int:
    spec = _load(run)
    h0 = spec.initial_forward_curve()
    maturities = args.maturity or [1.0]
    frame = pd.DataFrame(
        {
            "maturity": maturities,
            "price": [bond_price(h0, tau) for tau in maturities],
            "yield": yield_curve(h0, maturities),
        }
    )
    outputs = [_write_table(run, "prices", frame)]
    _write_manifest(run, outputs)
    print(frame.to_string(index=False))
    return 0


def cmd_martingale(run: RunConfig, args) -> int:
    spec = _load(run)
    maturity = (args.maturity or [2.0])[0]
    report = martingale_test(
        spec,
        maturity,
        run.n_paths,
        run.seed,
        n_steps=run.n_steps,
        drift_enabled=not args.no_drift,
        threads=run.threads,
    )
    payload = report.model_dump(mode="json")
    write_json(run.out_dir / "martingale.json", payload)
    _write_manifest(run, ["martingale.json"])
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_rank_probe(run: RunConfig, args) -> int:
    spec = _load(run)
    config_ = spec.curve_config()
    thetas = [float(t) for t in args.thetas.split(",") if t.strip()]
    Lambda = integral_operator(curve_on_grid(spec.terms[0].lam, config_))
    sample_xs = np.linspace(0.0, config_.x_max, args.samples)

    table = rank_probe_table(spec.levy, Lambda, thetas, sample_xs)
    frame = pd.DataFrame(
        {
            "m": [row.m for row in table],
            "theta": thetas,
            "rank": [row.rank for row in table],
            "sv_max": [row.singular_values[0] for row in table],
            "sv_min": [row.singular_values[-1] for row in table],
        }
    )
    outputs = [_write_table(run, "rank_probe", frame)]

    extra: Dict[str, Any] = {}
    if args.vpsi:
        h0 = spec.initial_forward_curve(config_)
        ranks = [vpsi_dimension_estimate(spec, h0, m, path_rng(run.seed, 0)) for m in range(1, args.vpsi + 1)]
        outputs.append(_write_table(run, "vpsi", pd.DataFrame({"m": range(1, args.vpsi + 1), "rank": ranks})))
        extra["vpsi_rank"] = ranks[-1]

    _write_manifest(run, outputs, extra)
    print(frame.to_string(index=False))
    if extra:
        print(f"V^Psi rank estimate (m={args.vpsi}): {extra['vpsi_rank']}")
    return 0


def cmd_moments(run: RunConfig, args) -> int:
    spec = _load(run)
    model = spec.levy
    series = taylor_coefficients(model, args.N)
    orders = list(range(1, args.N + 1))
    frame = pd.DataFrame(
        {
            "n": orders,
            "taylor": series.coefficients[1:],
            "moment": [jump_moment(model, n) for n in orders],
            "abs_moment": [jump_abs_moment(model, n) for n in orders],
            "moment_quadrature": [jump_moment_quadrature(model, n) for n in orders],
        }
    )
    n0 = moment_nonvanishing_index(model, args.N) if args.N >= 3 else None
    outputs = [_write_table(run, "moments", frame)]
    _write_manifest(run, outputs, {"n0": n0, "radius": series.radius})
    print(frame.to_string(index=False))
    print(f"n0 = {n0}, radius = {series.radius}")
    return 0


def cmd_series_demo(run: RunConfig, args) -> int:
    rows = series_demo_table([5, 10, 20, 40, 80], p=args.p)
    frame = pd.DataFrame(rows)
    outputs = [_write_table(run, "series_demo", frame)]
    _write_manifest(run, outputs)
    print(frame.to_string(index=False))
    return 0


# --- Parser ---
def _count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Random seed (required for stochastic subcommands)")
    common.add_argument("--paths", type=int, default=1, help="Number of Monte Carlo paths (default: 1)")
    common.add_argument("--steps", type=int, default=None, help="Time steps per path")
    common.add_argument("--horizon", type=float, default=1.0, help="Simulation horizon in years (default: 1)")
    common.add_argument("--out", default=None, help="Output directory (default: LEVY_HJMM_OUT_DIR or ./out)")
    common.add_argument("--format", choices=["csv", "json"], default="csv", help="Table format (default: csv)")
    common.add_argument("--grid-points", type=int, default=None, help="Override the spec's grid size")
    common.add_argument("--x-max", type=float, default=None, help="Override the spec's largest time to maturity")

    parser = argparse.ArgumentParser(prog="levyhjmm", description="Lévy-driven HJMM term-structure toolkit")
    sub = parser.add_subparsers(dest="cmd")

    p_check = sub.add_parser("check", parents=[common], help="Validate a spec and decide its realization")
    p_check.add_argument("spec", help="Model spec file")
    p_check.set_defaults(func=cmd_check, stochastic=False)

    p_sim = sub.add_parser("simulate", parents=[common], help="Simulate forward-curve paths")
    p_sim.add_argument("spec", help="Model spec file")
    p_sim.add_argument("--mode", choices=["full", "reduced", "both"], default="full", help="Scheme (default: full)")
    p_sim.add_argument(
        "--curves",
        type=_count,
        default=0,
        metavar="N",
        help="Write full-scheme curve histories of the first N paths (default: 0)",
    )
    p_sim.set_defaults(func=cmd_simulate, stochastic=True)

    p_price = sub.add_parser("price", parents=[common], help="Zero-coupon prices of the initial curve")
    p_price.add_argument("spec", help="Model spec file")
    p_price.add_argument("--maturity", type=float, action="append", help="Time to maturity (repeatable)")
    p_price.set_defaults(func=cmd_price, stochastic=False)

    p_mart = sub.add_parser("martingale", parents=[common], help="Monte Carlo test of discounted bond prices")
    p_mart.add_argument("spec", help="Model spec file")
    p_mart.add_argument("--maturity", type=float, action="append", help="Bond maturity T (default: 2)")
    p_mart.add_argument("--no-drift", action="store_true", help="Zero the no-arbitrage drift (negative control)")
    p_mart.set_defaults(func=cmd_martingale, stochastic=True)

    p_rank = sub.add_parser("rank-probe", parents=[common], help="Numerical rank of Psi(theta_i * Lambda)")
    p_rank.add_argument("spec", help="Model spec file")
    p_rank.add_argument("--thetas", default="0.2,0.4,0.6,0.8", help="Comma-separated distinct thetas")
    p_rank.add_argument("--samples", type=int, default=64, help="Sample points on [0, x_max] (default: 64)")
    p_rank.add_argument("--vpsi", type=int, default=0, help="Also estimate dim V^Psi with up to M samples")
    p_rank.set_defaults(func=cmd_rank_probe, stochastic=False)

    p_mom = sub.add_parser("moments", parents=[common], help="Cumulant Taylor coefficients and jump moments")
    p_mom.add_argument("spec", help="Model spec file")
    p_mom.add_argument("-N", type=int, default=8, help="Highest order (default: 8)")
    p_mom.set_defaults(func=cmd_moments, stochastic=False)

    p_series = sub.add_parser("series-demo", parents=[common], help="Convergence table of a multivariate series")
    p_series.add_argument("--p", type=int, default=2, choices=[1, 2, 3], help="Number of variables (default: 2)")
    p_series.set_defaults(func=cmd_series_demo, stochastic=False)

    return parser


DEFAULT_STEPS = {"martingale": 200}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return USAGE_ERROR

    configure_logging()
    started = time.perf_counter()
    try:
        run = RunConfig(
            subcommand=args.cmd,
            spec=getattr(args, "spec", None),
            seed=args.seed,
            stochastic=args.stochastic or bool(getattr(args, "vpsi", 0)),
            n_paths=args.paths,
            n_steps=args.steps if args.steps is not None else DEFAULT_STEPS.get(args.cmd, 100),
            horizon=args.horizon,
            out=args.out or config.out_dir,
            format=args.format,
            grid_points=args.grid_points,
            x_max=args.x_max,
            threads=config.threads,
        )
    except ValidationError as e:
        for error in e.errors():
            print(f"usage error: {error['msg'].removeprefix('Value error, ')}", file=sys.stderr)
        return USAGE_ERROR

    install_run_context(subcommand=run.subcommand, spec=run.spec, seed=run.seed)
    try:
        code = args.func(run, args)
    except (HJMMError, OSError, ValueError) as e:
        logger.error(f"{run.subcommand} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        code = 1
    log_run(run.subcommand, run.spec, code, (time.perf_counter() - started) * 1000)
    return code


if __name__ == "__main__":
    sys.exit(main())
