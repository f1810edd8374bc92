"""Command-line entry point.

Every experiment is driven by a TOML scenario config; subcommands pin the
experiment type, ``run`` executes a config or a bundled scenario as-is.
Exit codes: 0 success, 2 config/schema violation, 3 numerical failure,
4 tolerance breach.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, NumericalError, ToleranceError
from .scenarios import (
    BUILTIN_SCENARIOS,
    SCENARIO_DESCRIPTIONS,
    load_toml,
    run_config,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4


def _add_common(parser):
    parser.add_argument("--config", help="scenario config (TOML)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--jobs", type=int, default=None, help="parallel workers (default: cores)")
    parser.add_argument("--dt", type=float, default=None, help="override integration step")
    parser.add_argument("--tol-energy", type=float, default=None, help="override energy drift bound")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geomodes",
        description="Conservative dynamics on Riemannian manifolds: geodesics, "
        "nonlinear normal modes, and strict-mode potential design.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("simulate", "geodesic", "linearize", "design", "invariance"):
        p = sub.add_parser(name, help=f"run a {name} experiment from a config")
        _add_common(p)
        p.set_defaults(experiment=name)

    modes = sub.add_parser("modes", help="mode detection and verification")
    modes_sub = modes.add_subparsers(dest="modes_command", required=True)
    for short, full in (("find", "modes-find"), ("verify", "modes-verify")):
        p = modes_sub.add_parser(short)
        _add_common(p)
        p.set_defaults(experiment=full)

    run = sub.add_parser("run", help="execute a config or a bundled scenario")
    _add_common(run)
    run.add_argument("--scenario", help="bundled scenario id (see 'scenarios')")
    run.set_defaults(experiment=None)

    sub.add_parser("scenarios", help="list bundled scenarios")
    return parser


def _load_config(args) -> dict:
    scenario = getattr(args, "scenario", None)
    if scenario is not None:
        if args.config is not None:
            raise ConfigError("give either --scenario or --config, not both")
        if scenario not in BUILTIN_SCENARIOS:
            raise ConfigError(
                f"unknown scenario {scenario!r}; available: {sorted(BUILTIN_SCENARIOS)}"
            )
        import copy

        return copy.deepcopy(BUILTIN_SCENARIOS[scenario])
    if args.config is None:
        raise ConfigError("--config is required (or --scenario for 'run')")
    return load_toml(args.config)


def _apply_overrides(cfg: dict, args) -> dict:
    if args.experiment is not None:
        declared = cfg.get("experiment")
        if declared is not None and declared != args.experiment:
            raise ConfigError(
                f"config declares experiment {declared!r} but the "
                f"{args.experiment!r} subcommand was invoked"
            )
        cfg["experiment"] = args.experiment
    params = cfg.setdefault("parameters", {})
    if args.dt is not None:
        params["dt"] = args.dt
    if args.tol_energy is not None:
        params["tol_energy"] = args.tol_energy
    if args.out is not None:
        cfg["out"] = args.out
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "scenarios":
        for name in sorted(BUILTIN_SCENARIOS):
            print(f"{name}  {SCENARIO_DESCRIPTIONS.get(name, '')}")
        return EXIT_OK

    try:
        cfg = _load_config(args)
        cfg = _apply_overrides(cfg, args)
        out_dir = cfg.get("out", "geomodes_out")
        report = run_config(cfg, out_dir, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceError as exc:
        print(f"tolerance breach: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(f"experiment: {report.experiment}")
    print(f"out: {out_dir}")
    print(f"artifacts: {' '.join(report.artifacts)}")
    print(f"wallclock_s: {report.wallclock:.3f}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
