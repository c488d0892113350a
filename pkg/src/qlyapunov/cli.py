"""Command-line entry point: ``qlyapunov {check,simulate,census,track}``.

Exit codes: 0 success, 1 experiment failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, config_from_dict, load_config, parse_target
from .experiments import ExperimentError, run_census, run_check, run_simulate, run_track

COMMANDS = {"check": run_check, "simulate": run_simulate, "census": run_census, "track": run_track}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlyapunov", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("model")
    src.add_argument("--config", type=Path, help="TOML experiment file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="named model preset")
    src.add_argument("--target", help="target state: diag:a,b,..  ket:c1,c2,..  or bell")
    run = common.add_argument_group("run")
    run.add_argument("--samples", type=int, help="number of random initial states")
    run.add_argument("--seed", type=int)
    run.add_argument("--t-final", type=float, dest="t_final")
    run.add_argument("--jobs", type=int, help="worker processes")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--gzip", action="store_true", default=None, help="gzip trajectory CSVs")
    run.add_argument("--plot", action="store_true", default=None, help="also render V(t) PNGs")
    run.add_argument("--no-write", action="store_true", help="print the report only")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="ideality / spectrum diagnostics")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo convergence experiment")
    sub.add_parser("census", parents=[common], help="classify the diagonal stationary states")
    sub.add_parser("track", parents=[common], help="pseudo-pure tracking with exceptionality verdict")
    return parser


def resolve_config(args):
    if args.config is not None:
        cfg = load_config(args.config)
        if args.preset:
            raise ConfigError("--preset", "give either --config or --preset, not both")
    elif args.preset:
        cfg = config_from_dict({"preset": args.preset})
    else:
        raise ConfigError("--config", "one of --config or --preset is required")
    if args.target:
        rho = parse_target(args.target, "--target")
        if rho.shape != cfg.h0.shape:
            raise ConfigError("--target", f"dimension {rho.shape[0]} does not match the model ({cfg.n})")
        cfg.rho_d0 = rho
    for name in ("samples", "seed", "jobs"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if cfg.samples < 1:
        raise ConfigError("--samples", "must be positive")
    if args.t_final is not None:
        if args.t_final <= 0:
            raise ConfigError("--t-final", "must be positive")
        cfg.integrator = dataclasses.replace(cfg.integrator, t_final=args.t_final)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.gzip:
        cfg.gzip = True
    if args.plot:
        cfg.plot = True
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = None if args.no_write else cfg.out_dir
    try:
        report = COMMANDS[args.command](cfg, out_dir)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command in ("simulate", "track"):
        report = {k: v for k, v in report.items() if k != "samples"}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
