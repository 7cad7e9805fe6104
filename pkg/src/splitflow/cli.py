"""``splitflow`` command line entry point."""
from __future__ import annotations

import argparse
import sys

from .errors import (
    ConfigError,
    NeutralityError,
    NonFiniteStateError,
    OracleNotConvergedError,
    ReferenceNotConvergedError,
)
from .experiments import (
    PRESETS,
    cmd_converge_space,
    cmd_converge_time,
    cmd_schemes,
    cmd_solve,
    load_config,
)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitflow", description="Split-step spectral solvers and convergence studies."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("solve", "run one evolution, dump trajectory norms and final field"),
        ("converge-time", "error vs time step against a fine reference"),
        ("converge-space", "error vs grid size at fixed time step"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named starting configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--m", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--T", type=float)
        p.add_argument("--scheme", choices=["lie", "strang", "yoshida4"])
        p.add_argument("--problem", choices=["sp", "nls", "wave"])
        p.add_argument("--alpha", type=float)
    sub.add_parser("schemes", help="list built-in schemes and their measured order")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schemes":
        cmd_schemes()
        return EXIT_OK
    try:
        cfg = load_config(
            args.config, args.preset,
            m=args.m, n=args.n, T=args.T, scheme=args.scheme, problem=args.problem, alpha=args.alpha,
        )
        runner = {
            "solve": cmd_solve,
            "converge-time": cmd_converge_time,
            "converge-space": cmd_converge_space,
        }[args.command]
        runner(cfg, out_dir=args.out)
    except (ConfigError, NeutralityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReferenceNotConvergedError, OracleNotConvergedError) as exc:
        print(f"convergence check failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except NonFiniteStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
