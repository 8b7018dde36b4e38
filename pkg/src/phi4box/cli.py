"""Command line harness.

Single runs:
    phi4box --scheme msilcc --amplitude 10 --sites 128 --duration 1 --out run.csv

Preset batches (one figure's data set each):
    phi4box --preset energy-vs-time --out results/

A line-based key=value config file can supply any flag (--config file);
explicit command line flags take precedence.  Exit codes: 0 clean,
2 configuration error, 3 divergence, 4 solver failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .bddv import SingularUpdateError
from .newton import DEFAULT_OVERFLOW_BOUND
from .nlsolve import BatchSolveError, MaxIterationsError, SingularNormalEquations
from .presets import PRESETS, run_preset
from .runner import INITIAL_PROFILES, SCHEMES, ConfigError, RunConfig, load_config_file, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_SOLVER = 4
EXIT_IO = 5

_CONFIG_KEYS = {
    "scheme": str,
    "amplitude": float,
    "r": float,
    "lam": float,
    "n_sites": int,
    "length": float,
    "duration_over_length": float,
    "record_every": int,
    "tol_residual": float,
    "max_iter": int,
    "lm_damping_init": float,
    "overflow_bound": float,
    "initial_profile": str,
    "out": str,
    "format": str,
    "force": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "snapshots": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "snapshot_every": int,
}

_FLAG_ALIASES = {
    "sites": "n_sites",
    "duration": "duration_over_length",
    "tol": "tol_residual",
    "lambda": "lam",
    "initial": "initial_profile",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phi4box",
        description="finite-difference integrators for the nonlinear wave equation "
        "with conservation diagnostics",
    )
    parser.add_argument("--scheme", choices=SCHEMES, help="integrator to run")
    parser.add_argument("--amplitude", "-A", type=float, help="initial amplitude")
    parser.add_argument("--r", type=float, help="quadratic potential coefficient")
    parser.add_argument("--lambda", dest="lam", type=float, help="quartic potential coefficient")
    parser.add_argument("--sites", type=int, help="number of lattice sites N")
    parser.add_argument("--length", type=float, help="spatial period L")
    parser.add_argument("--duration", type=float, help="integration time in units of L")
    parser.add_argument("--record-every", type=int, help="record every k-th time row")
    parser.add_argument("--tol", type=float, help="cell solver residual tolerance")
    parser.add_argument("--max-iter", type=int, help="cell solver iteration cap")
    parser.add_argument("--overflow-bound", type=float, help=f"divergence bound (default {DEFAULT_OVERFLOW_BOUND:g})")
    parser.add_argument("--initial", choices=INITIAL_PROFILES, help="initial profile")
    parser.add_argument("--snapshots", action="store_true", default=None, help="also write field snapshots")
    parser.add_argument("--out", help="output file (runs) or directory (presets)")
    parser.add_argument("--format", choices=("csv", "json"), help="run output format")
    parser.add_argument("--preset", choices=PRESETS, help="run a preset experiment batch")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering for presets")
    parser.add_argument("--force", action="store_true", default=None, help="overwrite existing outputs")
    parser.add_argument("--config", help="key=value config file supplying any flag")
    return parser


def _config_from_sources(args) -> RunConfig:
    values = {}
    if args.config:
        raw = load_config_file(args.config)
        for key, text in raw.items():
            key = _FLAG_ALIASES.get(key, key)
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from exc
    cli_map = {
        "scheme": args.scheme,
        "amplitude": args.amplitude,
        "r": args.r,
        "lam": args.lam,
        "n_sites": args.sites,
        "length": args.length,
        "duration_over_length": args.duration,
        "record_every": args.record_every,
        "tol_residual": args.tol,
        "max_iter": args.max_iter,
        "overflow_bound": getattr(args, "overflow_bound", None),
        "initial_profile": args.initial,
        "snapshots": args.snapshots,
        "out": args.out,
        "format": args.format,
        "force": args.force,
    }
    for key, value in cli_map.items():
        if value is not None:
            values[key] = value
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in known})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.preset:
            if not args.out:
                raise ConfigError("presets need --out DIRECTORY")
            base = _config_from_sources(args)
            base.out = None
            run_preset(
                args.preset,
                args.out,
                base=base,
                force=bool(args.force),
                figures=not args.no_figures,
            )
            return EXIT_OK
        config = _config_from_sources(args)
        if config.out is None:
            raise ConfigError("single runs need --out FILE (or --preset NAME)")
        result = run(config)
        if result.diverged:
            print(
                f"diverged at t/L = {result.divergence_t_over_length:.6g} "
                f"({len(result.records)} records kept)",
                file=sys.stderr,
            )
            return EXIT_DIVERGED
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MaxIterationsError, BatchSolveError, SingularNormalEquations, SingularUpdateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, FileExistsError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
