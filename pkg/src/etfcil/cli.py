"""Command line front end.

Subcommands: ``run`` (full experiment to an output directory), ``plan``
(print a session plan as JSON), ``etf`` (build/verify/emit a prototype
frame), ``oracle`` (solve the constrained feature problem and report
residuals), ``metrics`` (recompute diagnostics from a saved feature dump).

Exit codes: 0 success, 1 configuration/usage error, 2 broken runtime
invariant.  Failures print ``ERROR <code>: message`` to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .config import (
    SEED_TERMINUS,
    build_plan,
    derive_seed,
    emit_config,
    load_config,
)
from .errors import ConfigError, EtfcilError
from .metrics import (
    nc_cross_cos,
    nc_self_cos,
    read_feature_dump,
    trace_ratio,
    write_feature_dump,
)
from .figures import save_run_figures
from .oracle import OracleProblem, check_nc_terminus, solve
from .report import write_metrics_csv, write_summary_json
from .stream import plan_to_json
from .terminus import (
    build_terminus,
    read_terminus,
    verify_geometry,
    write_terminus,
)
from .trainer import run_experiment

INTERFACE_REVISION = "r1"


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems on exit code 1 with the
    same ERROR prefix as every other failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"ERROR ConfigError: {message}\n")
        raise SystemExit(1)


def _print_json(payload):
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    cfg.validate()
    os.makedirs(args.out, exist_ok=True)

    report = run_experiment(cfg)

    write_metrics_csv(report, args.out)
    write_summary_json(report, os.path.join(args.out, "summary.json"))
    with open(os.path.join(args.out, "plan.json"), "w") as fh:
        fh.write(plan_to_json(build_plan(cfg)) + "\n")
    terminus = build_terminus(
        cfg.feature_dim,
        cfg.k_total,
        cfg.frame_kind,
        seed=derive_seed(cfg.seed, SEED_TERMINUS),
    )
    write_terminus(terminus, os.path.join(args.out, "terminus.txt"))
    write_feature_dump(
        os.path.join(args.out, "features_final_test.txt"),
        report.final_test_features,
        report.final_test_labels,
    )
    with open(os.path.join(args.out, "config.cfg"), "w") as fh:
        fh.write(emit_config(cfg))
    save_run_figures(report, args.out)

    sys.stdout.write(f"A {report.average_accuracy:.17g}\n")
    sys.stdout.write(f"PD {report.performance_drop:.17g}\n")
    sys.stdout.write(f"wrote {args.out}\n")
    return 0


def _cmd_plan(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    cfg.validate()
    text = plan_to_json(build_plan(cfg))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0


def _cmd_etf(args):
    terminus = build_terminus(args.d, args.K, args.kind, seed=args.seed)
    if args.out:
        write_terminus(terminus, args.out)
    if args.verify or not args.out:
        report = verify_geometry(terminus)
        _print_json(
            {
                "max_norm_dev": report["max_norm_dev"],
                "max_offdiag_dev": report["max_offdiag_dev"],
                "colsum_norm": report["colsum_norm"],
                "pass": report["pass"],
            }
        )
    return 0


def _parse_int_list(text, flag):
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma-separated integers: {text}") from exc
    if not values:
        raise ConfigError(f"{flag} is empty")
    return values


def _cmd_oracle(args):
    counts = _parse_int_list(args.counts, "--counts")
    sessions = None
    if args.sessions:
        sessions = _parse_int_list(args.sessions, "--sessions")
    terminus = build_terminus(args.d, args.K, args.kind, seed=args.frame_seed)
    problem = OracleProblem(
        terminus=terminus,
        counts=tuple(counts),
        session_sizes=None if sessions is None else tuple(sessions),
        loss=args.loss,
        seed=args.seed,
    )
    result = solve(problem, step=args.step, max_iter=args.max_iter, tol=args.tol)
    check = check_nc_terminus(
        result.features, result.labels, terminus, tol=args.check_tol
    )
    _print_json(
        {
            "iterations": result.iterations,
            "converged": result.converged,
            "final_objective": result.final_objective,
            "residual_norm": check["residual_norm"],
            "residual_align": check["residual_align"],
            "residual_cross": check["residual_cross"],
            "pass": check["pass"],
        }
    )
    return 0


def _cmd_metrics(args):
    features, labels = read_feature_dump(args.features)
    terminus = read_terminus(args.terminus)
    prototypes = terminus.w.T
    scope = sorted(int(c) for c in np.unique(labels))
    _print_json(
        {
            "classes": scope,
            "cross_cos": nc_cross_cos(features, labels, prototypes, scope),
            "self_cos": nc_self_cos(features, labels, prototypes, scope),
            "trace_ratio": trace_ratio(features, labels, scope),
        }
    )
    return 0


def _build_parser():
    parser = _Parser(
        prog="etfcil",
        description="Incremental learning with a fixed collapse-terminus classifier.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"etfcil {__version__} (interface {INTERFACE_REVISION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train through a configured stream")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("plan", help="print the session plan as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("etf", help="build a prototype frame")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--kind", choices=("etf", "orthogonal"), default="etf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=_cmd_etf)

    p = sub.add_parser("oracle", help="solve the constrained feature problem")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--loss", choices=("align", "ce"), default="align")
    p.add_argument("--counts", required=True)
    p.add_argument("--sessions", default=None)
    p.add_argument("--kind", choices=("etf", "orthogonal"), default="etf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame-seed", type=int, default=0)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--check-tol", type=float, default=1e-2)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("metrics", help="recompute diagnostics from a feature dump")
    p.add_argument("--features", required=True)
    p.add_argument("--terminus", required=True)
    p.set_defaults(func=_cmd_metrics)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"ERROR {exc.code}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"ERROR ConfigError: {exc}\n")
        return 1
    except EtfcilError as exc:
        sys.stderr.write(f"ERROR {exc.code}: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
