"""``splitconf`` command line.

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import CapabilityError, ConfigError, DomainError, SplitConfError
from .experiments import (
    DEFAULT_REPS,
    PRESETS,
    SMOKE_REPS,
    UnknownPresetError,
    dgp_for_data,
    load_rows,
    membership_check,
    parse_methods,
    preset_mode,
    run_custom,
    run_preset,
)
from .simulation import DgpKind, DgpSpec

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    src.add_argument("--config", type=Path, help="key=value experiment file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=None, help=f"replications (default {DEFAULT_REPS})")
    p.add_argument("--smoke", action="store_true", help=f"shorthand for --reps {SMOKE_REPS}")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--no-svg", action="store_true", help="skip the coverage chart")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitconf", description="Split-sample confidence sets for M-estimation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_run_args(sub.add_parser("coverage", help="Monte Carlo coverage experiments"))
    _add_run_args(sub.add_parser("width", help="Monte Carlo set-width experiments"))

    m = sub.add_parser("member", help="test candidate parameters for membership")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--dgp", choices=[k.value for k in DgpKind])
    src.add_argument("--data", type=Path, help="numeric CSV of observation rows")
    m.add_argument("--model", choices=["mean", "regression", "manski", "quantile"],
                   help="loss for --data rows")
    m.add_argument("--theta", action="append", required=True,
                   help="comma list of values, 'hat' or 'true'; repeatable")
    m.add_argument("--method", required=True, help="naive, ui[:sigma], eb[:b0], studentized or bc")
    m.add_argument("--alpha", type=float, default=0.05)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--rep", type=int, default=0, help="replication id of the simulated data")
    m.add_argument("--n", type=int, default=100, help="total sample size for --dgp")
    m.add_argument("--d", type=int, default=None, help="dimension for --dgp")
    m.add_argument("--beta", type=float, default=1.0)
    m.add_argument("--gamma", type=float, default=0.5)
    m.add_argument("--ratio", type=float, default=0.5)
    return parser


def _reps(args) -> int:
    if args.smoke:
        return SMOKE_REPS
    reps = DEFAULT_REPS if args.reps is None else args.reps
    if reps < 1:
        raise UsageError("--reps must be >= 1")
    return reps


def _cmd_run(args) -> int:
    reps = _reps(args)
    if args.config is not None:
        path = run_custom(args.config, args.out, default_mode=args.command)
        print(path)
        return EXIT_OK
    try:
        mode = preset_mode(args.preset)
    except UnknownPresetError as exc:
        raise UsageError(str(exc)) from None
    if mode != args.command:
        raise UsageError(f"{args.preset} is a {mode} preset; run it with `splitconf {mode}`")
    result = run_preset(args.preset, args.seed, reps, args.out or Path("."), svg=not args.no_svg)
    for p in (*result.csv_paths, *result.svg_paths):
        print(p)
    return EXIT_OK


def _cmd_member(args) -> int:
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError("alpha must lie in (0,1)", key="alpha")
    data = None
    if args.data is not None:
        if args.model is None:
            raise UsageError("--data needs --model")
        data = load_rows(args.data)
        dgp = dgp_for_data(data, args.model, args.gamma)
    else:
        kind = DgpKind(args.dgp)
        d = args.d if args.d is not None else (2 if kind is DgpKind.MANSKI_2D else 1)
        try:
            dgp = DgpSpec(kind, args.n, d, beta=args.beta, gamma=args.gamma)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
    try:
        methods = parse_methods(args.method, [args.alpha], dgp)
    except DomainError as exc:
        raise ConfigError(str(exc), key="method") from None
    if len(methods) != 1:
        raise UsageError("--method takes a single method")
    if data is not None:
        lines = membership_check(args.theta, methods[0], data=data, model_name=args.model,
                                 ratio=args.ratio, gamma=args.gamma)
    else:
        lines = membership_check(args.theta, methods[0], dgp=dgp, seed=args.seed,
                                 replication=args.rep, ratio=args.ratio)
    for line in lines:
        print(line)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "member":
            return _cmd_member(args)
        return _cmd_run(args)
    except UsageError as exc:
        print(f"splitconf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CapabilityError) as exc:
        print(f"splitconf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SplitConfError, OSError) as exc:
        print(f"splitconf: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
