from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import jsonschema

from app.core.config import settings
from app.core.errors import ColmeError, ConfigError
from app.services.experiment_service import curves_experiment, load_experiment, simulate_experiment
from app.services.validation import run_validation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out_dir(arg: Optional[str], file_value: Optional[str]) -> Path:
    return Path(arg or file_value or settings.output_dir)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        exp = load_experiment(args.config)
    except (ConfigError, OSError) as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG

    if args.seed_list:
        seeds = list(args.seed_list)
    elif args.seeds is not None:
        if args.seeds < 1:
            _err("config error: --seeds must be >= 1")
            return EXIT_CONFIG
        seeds = [exp.seeds.base + i for i in range(args.seeds)]
    else:
        seeds = exp.seed_values()

    out = _out_dir(args.out, exp.output)
    try:
        summary, rows, notes = simulate_experiment(exp, seeds=seeds, out_dir=out, stride=args.stride)
    except ConfigError as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG
    except (ColmeError, OSError, jsonschema.ValidationError) as e:
        _err(f"runtime error: {e}")
        return EXIT_RUNTIME
    for n in notes:
        _err(n)
    final = summary["final_mse"].get("simulated")
    _err(f"wrote {len(rows)} rows to {out / 'trajectory.csv'}; final mse={final}")
    return EXIT_OK


def cmd_curves(args: argparse.Namespace) -> int:
    try:
        exp = load_experiment(args.config)
    except (ConfigError, OSError) as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG
    out = _out_dir(args.out, exp.output)
    try:
        rows, notes = curves_experiment(exp, out_dir=out, stride=args.stride)
    except ConfigError as e:
        _err(f"config error: {e}")
        return EXIT_CONFIG
    except (ColmeError, OSError, jsonschema.ValidationError) as e:
        _err(f"runtime error: {e}")
        return EXIT_RUNTIME
    for n in notes:
        _err(n)
    _err(f"wrote {len(rows)} rows to {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_validation(quick=args.quick, sigma_dp_fault=args.fault_sigma_scale)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colme", description="Private collaborative online mean estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the seed sweep and write trajectory.csv + summary.json")
    sim.add_argument("config")
    seeds = sim.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, help="number of seeds starting at the file's base seed")
    seeds.add_argument("--seed-list", type=int, nargs="+", dest="seed_list")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--stride", type=int, help="output every K-th time step")
    sim.set_defaults(func=cmd_simulate)

    cur = sub.add_parser("curves", help="analytic curves only")
    cur.add_argument("config")
    cur.add_argument("--out", help="output directory")
    cur.add_argument("--stride", type=int)
    cur.set_defaults(func=cmd_curves)

    val = sub.add_parser("validate", help="run the property suite")
    val.add_argument("--quick", action="store_true")
    val.add_argument("--fault-sigma-scale", type=float, default=1.0, dest="fault_sigma_scale", help=argparse.SUPPRESS)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "stride", None) is not None and args.stride < 1:
        _err("config error: --stride must be >= 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
