"""Command-line entry point: ``smallnoise {simulate,estimate,experiment,kernels}``.

Exit codes: 0 success, 1 gate failure, 2 config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._io import atomic_write_text
from .config import load_config
from .errors import (BoundaryError, ConfigError, DomainError, NumericalError,
                     ReplicationError, ResolutionError)
from .estimators import TARGET_THETA, estimate_curve, curve_to_csv
from .kernels import kernel_from_name, verify_conditions
from .mc_harness import run_experiment, write_report
from .sde_sim import path_from_csv, path_to_csv, simulate

EXIT_OK = 0
EXIT_GATE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _overrides(args):
    return {"seed": getattr(args, "seed", None), "epsilon": getattr(args, "epsilon", None),
            "override_resolution": getattr(args, "override_resolution", False)}


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    path = simulate(cfg.sde, cfg.seed)
    atomic_write_text(args.out, path_to_csv(path))
    print(f"wrote {cfg.sde.grid.n_steps + 1} rows to {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    if cfg.estimator is None:
        raise ConfigError("estimator section is required for estimate")
    required = ("t", "X")
    if cfg.estimator.target == TARGET_THETA:
        required = ("t", "X", "indicator_A", "Y_increment")
    try:
        text = Path(args.path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read path CSV {args.path}: {exc}") from exc
    try:
        path = path_from_csv(text, require=required)
    except ValueError as exc:
        raise ConfigError(f"path CSV schema error: {exc}") from exc
    n_eval = args.n_eval if args.n_eval is not None else cfg.n_eval
    curve = estimate_curve(path, cfg.estimator, n_eval)
    atomic_write_text(args.out, curve_to_csv(curve))
    print(f"wrote {len(curve.values)} estimates to {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    plan = cfg.plan()
    report = run_experiment(plan, n_workers=max(1, args.threads))
    if args.seed is not None:
        report.plan["seed_override"] = int(args.seed)
    write_report(report, args.out)
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_kernels_verify(args) -> int:
    ok = True
    for name in args.names:
        try:
            kernel = kernel_from_name(name)
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"kernel {name!r}: {exc}") from exc
        report = verify_conditions(kernel)
        ok &= report.a2_ok and report.a3_order >= kernel.order_k
        print(json.dumps({"kernel": kernel.name, **report.as_dict()}, sort_keys=True))
    return EXIT_OK if ok else EXIT_GATE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smallnoise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", required=True, help=out_help)
        sp.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        sp.add_argument("--epsilon", type=float, default=None, help="override the noise level")
        sp.add_argument("--override-resolution", action="store_true",
                        help="accept grids with dt > phi/20 (warns)")

    sp = sub.add_parser("simulate", help="simulate one path and write it as CSV")
    common(sp, "output CSV path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate a curve from a path CSV")
    common(sp, "output CSV path")
    sp.add_argument("--path", required=True, help="path CSV written by simulate")
    sp.add_argument("--n-eval", type=int, default=None)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    common(sp, "output directory")
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("kernels", help="kernel utilities")
    ksub = sp.add_subparsers(dest="kernel_command", required=True)
    kv = ksub.add_parser("verify", help="print the moment-condition report")
    kv.add_argument("names", nargs="+", help="uniform, triangular, epanechnikov or order:k")
    kv.set_defaults(func=cmd_kernels_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, DomainError, BoundaryError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ReplicationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
