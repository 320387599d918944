"""Command-line interface.

Subcommands: simulate, covariance, identity, wiener, diagnostics, isometry,
sweep.  All randomness is governed solely by --seed.  Exit codes: 0 success,
1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    DEFAULT_EPS_LADDER,
    ExperimentConfig,
    run_assumption_diagnostics,
    run_covariance_validation,
    run_identity_experiment,
    run_isometry_expansion,
    run_sweep,
    run_wiener_experiment,
)
from .paths import build_rlfbm, simulate_brownian, write_path_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlforward",
        description=(
            "Forward stochastic integrals against Riemann-Liouville fractional "
            "Brownian motion: simulation, representation, Monte Carlo checks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": "simulate paths and export them as CSV (t, W, B)",
        "covariance": "validate the empirical covariance against the closed form",
        "identity": "forward estimator vs martingale representation",
        "wiener": "forward estimator vs Wiener integral (deterministic integrand)",
        "diagnostics": "discrete integrability-assumption diagnostics",
        "isometry": "three-term isometry expansion check (cubic cost)",
        "sweep": "identity experiment across a ladder of grid resolutions",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--hurst", type=float, default=0.75, help="Hurst index in (1/2, 1)")
        p.add_argument("--horizon", type=float, default=1.0, help="time horizon T > 0")
        if name == "sweep":
            p.add_argument(
                "--steps",
                type=str,
                default="128,256,512",
                help="comma-separated grid resolutions",
            )
        else:
            p.add_argument("--steps", type=int, default=512, help="grid cells on [0, T]")
        p.add_argument(
            "--ext-steps",
            type=int,
            default=64,
            help="extra cells beyond T (must cover the largest eps multiple)",
        )
        p.add_argument("--paths", type=int, default=2000, help="number of Monte Carlo paths")
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        p.add_argument(
            "--model",
            type=str,
            default="linear",
            help="integrand model: deterministic | linear | quadratic | cosine | fracmart",
        )
        p.add_argument(
            "--model-param",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="model parameter (repeatable), e.g. alpha=0.25 or z=cosw or g=one",
        )
        p.add_argument(
            "--eps-ladder",
            type=str,
            default=",".join(str(e) for e in DEFAULT_EPS_LADDER),
            help="comma-separated eps values in units of the grid step (integers)",
        )
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker threads over path blocks")
        p.add_argument(
            "--config",
            type=str,
            default=None,
            help="JSON config file; its entries override the flags",
        )
    return parser


def _parse_model_params(items: list[str]) -> dict:
    out: dict = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"--model-param expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _parse_eps_ladder(text: str) -> tuple:
    entries = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            val = float(tok)
        except ValueError as exc:
            raise ValueError(f"eps ladder entry {tok!r} is not a number") from exc
        if val <= 0 or abs(val - round(val)) > 1e-9:
            raise ValueError(
                f"eps ladder entry {tok!r} must be a positive integer multiple of the grid step"
            )
        entries.append(int(round(val)))
    if not entries:
        raise ValueError("eps ladder must contain at least one entry")
    return tuple(entries)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {
        "hurst": args.hurst,
        "horizon": args.horizon,
        "steps": args.steps,
        "ext_steps": args.ext_steps,
        "n_paths": args.paths,
        "seed": args.seed,
        "model": args.model,
        "model_params": _parse_model_params(args.model_param),
        "eps_ladder": _parse_eps_ladder(args.eps_ladder),
        "out": args.out,
        "workers": args.workers,
    }
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
        if not isinstance(overrides, dict):
            raise ValueError("config file must hold a JSON object")
        for key, val in overrides.items():
            if key not in values:
                raise ValueError(f"unknown config key {key!r}")
            if key == "eps_ladder":
                if isinstance(val, (list, tuple)):
                    val = _parse_eps_ladder(",".join(str(v) for v in val))
                else:
                    val = _parse_eps_ladder(str(val))
            values[key] = val
    return values


def _steps_list(raw) -> list[int]:
    if isinstance(raw, int):
        return [raw]
    out = []
    for tok in str(raw).split(","):
        tok = tok.strip()
        if tok:
            out.append(int(tok))
    if not out:
        raise ValueError("sweep requires at least one grid resolution")
    return out


def cli_main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse errors -> validation failures
        return 0 if exc.code in (0, None) else 1
    try:
        values = _config_from_args(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    command = args.command
    try:
        if command == "sweep":
            steps_list = _steps_list(values["steps"])
            values["steps"] = steps_list[0]
            config = ExperimentConfig(**values)
            config.validate()
        else:
            values["steps"] = int(values["steps"])
            config = ExperimentConfig(**values)
            config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if command == "simulate":
            _run_simulate(config)
        elif command == "covariance":
            report = run_covariance_validation(config)
            print(
                f"covariance: max |z| = {report['max_abs_z']:.3f}, "
                f"max diagonal rel err = {report['max_rel_err_diagonal']:.3e}"
            )
        elif command == "identity":
            stats = run_identity_experiment(config)
            _print_summary(stats)
        elif command == "wiener":
            if config.model == "linear":
                config.model = "deterministic"
            stats = run_wiener_experiment(config)
            _print_summary(stats)
        elif command == "diagnostics":
            report = run_assumption_diagnostics(config)
            for key, entry in report["assumptions"].items():
                print(
                    f"{key}: {entry['value']:.6g} -> {entry['value_refined']:.6g} "
                    f"(stable: {entry['stable_within_20pct']})"
                )
            for warning in report["warnings"]:
                print(f"warning: {warning}")
        elif command == "isometry":
            report = run_isometry_expansion(config)
            print(
                f"isometry: lhs = {report['lhs_mean']:.6g}, rhs = {report['rhs_mean']:.6g}, "
                f"|z| = {report['z']:.3f}"
            )
        elif command == "sweep":
            report = run_sweep(config, steps_list)
            print(f"sweep: {len(report['rows'])} (steps, eps) rows")
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(f"unknown command {command!r}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


def _run_simulate(config: ExperimentConfig) -> None:
    cfg, grid = config.validate()
    if config.out is None:
        raise ValueError("simulate requires --out")
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for p in range(config.n_paths):
        path = build_rlfbm(simulate_brownian(grid, config.seed, p), cfg)
        write_path_csv(path, str(outdir / f"path_{p:05d}.csv"))
    print(f"wrote {config.n_paths} path file(s) to {outdir}")


def _print_summary(stats) -> None:
    print(
        f"{stats.estimator}: N={stats.n_paths}, rhs mean={stats.rhs_mean:.6f} "
        f"(stderr {stats.rhs_stderr:.6f}), rhs var={stats.rhs_variance:.6f}, "
        f"drift={stats.drift:.6f}"
    )
    for row in stats.rows:
        print(
            f"  eps={row.eps_steps:3d}dt: mean={row.mean:.6f} var={row.variance:.6f} "
            f"gap={row.gap:.6f} (stderr {row.gap_stderr:.2e})"
        )


def main() -> None:  # console entry point
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
