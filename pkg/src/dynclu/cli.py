"""Command-line entry point.

Subcommands:
  simulate    emit one or more snapshot series for a config
  estimate    compute statistics and solve the moment equations on a series
  moments     print the analytic moment vector for a config
  experiment  run the full L-run reproduction and write reports
  kstest      distribution-equality procedure between two configs
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .errors import DyncluError
from .estimator import compute_stats, solve_moments
from .experiment import (
    ExperimentConfig,
    analytic_moments,
    load_config,
    run_equality_test,
    run_experiment,
    run_seed,
)
from .simulate import (
    read_series_binary,
    read_series_csv,
    simulate,
    write_series_binary,
    write_series_csv,
)


def _add_common(parser, config_flag=True):
    if config_flag:
        parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, default=None, help="override root seed")
    parser.add_argument("--runs", type=int, default=None, help="override run count")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--workers", type=int, default=None, help="worker processes (default: CPUs)"
    )
    parser.add_argument(
        "--divisor",
        choices=("m", "2m"),
        default=None,
        help="override the stationarity divisor convention",
    )


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if getattr(args, "runs", None) is not None:
        config = dataclasses.replace(config, runs=args.runs)
    if args.divisor is not None:
        family = dataclasses.replace(config.family, divisor=args.divisor)
        config = dataclasses.replace(config, family=family)
    if args.out is not None:
        config = dataclasses.replace(config, out=args.out)
    return config


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    return max(1, os.cpu_count() or 1)


def _cmd_simulate(args) -> int:
    config = _load(args)
    out = config.out or "."
    os.makedirs(out, exist_ok=True)
    spec = config.family.build_spec(*config.truth)
    for index in range(config.runs):
        series = simulate(spec, config.scheme, run_seed(config.seed, index))
        if args.format in ("csv", "both"):
            write_series_csv(series, os.path.join(out, f"series_{index}.csv"))
        if args.format in ("binary", "both"):
            write_series_binary(series, os.path.join(out, f"series_{index}.bin"))
    print(f"wrote {config.runs} series to {out}")
    return 0


def _cmd_estimate(args) -> int:
    config = _load(args)
    if args.series.endswith(".bin"):
        series = read_series_binary(args.series)
    else:
        series = read_series_csv(args.series)
    stats = compute_stats(series)
    result = solve_moments(stats, config.family, config.scheme)
    payload = result.to_json_dict()
    print(json.dumps(payload, indent=2))
    if config.out:
        os.makedirs(config.out, exist_ok=True)
        with open(os.path.join(config.out, "estimate.json"), "w") as fh:
            json.dump(payload, fh, indent=2)
    return 0


def _cmd_moments(args) -> int:
    config = _load(args)
    mv = analytic_moments(config)
    print(
        json.dumps(
            {"s": mv.s, "rho1": mv.rho1, "rho2": mv.rho2, "scheme": mv.scheme}, indent=2
        )
    )
    return 0


def _cmd_experiment(args) -> int:
    config = _load(args)
    report = run_experiment(config, out_dir=config.out, workers=_workers(args))
    summary = report.summary
    print(
        f"runs={summary['n_runs']} converged={summary['n_converged']} "
        f"failed={summary['n_failed']} nonconverged={summary['n_nonconverged']}"
    )
    for name, entry in summary.get("params", {}).items():
        delta = entry["delta_std"]
        delta_text = "n/a" if delta is None else f"{delta:.6g}"
        print(
            f"  {name}: mean={entry['mean']:.6g} std={entry['std']:.6g} "
            f"delta_std={delta_text}"
        )
    for note in report.notes:
        print(f"  note: {note}")
    return 0


def _cmd_kstest(args) -> int:
    config_a = load_config(args.config_a)
    config_b = load_config(args.config_b)
    if args.seed is not None:
        config_a = dataclasses.replace(config_a, seed=args.seed)
        config_b = dataclasses.replace(config_b, seed=args.seed + 1)
    if args.runs is not None:
        config_a = dataclasses.replace(config_a, runs=args.runs)
        config_b = dataclasses.replace(config_b, runs=args.runs)
    result = run_equality_test(
        config_a, config_b, level=args.level, out_dir=args.out, workers=_workers(args)
    )
    print(f"mean s_hat: {result.mean_s_a:.4f} vs {result.mean_s_b:.4f}")
    for label, verdict in (("s_hat", result.ks_s), ("rho1_hat", result.ks_rho1)):
        print(
            f"  KS[{label}]: D={verdict.statistic:.4f} p={verdict.p_value:.4g} "
            f"reject={verdict.reject}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynclu",
        description="Dynamic Chung-Lu graph: simulation and moment estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="emit snapshot series")
    _add_common(p_sim)
    p_sim.add_argument("--format", choices=("csv", "binary", "both"), default="csv")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate parameters from a series file")
    _add_common(p_est)
    p_est.add_argument("--series", required=True, help="series CSV or binary dump")
    p_est.set_defaults(fn=_cmd_estimate)

    p_mom = sub.add_parser("moments", help="print the analytic moment vector")
    _add_common(p_mom)
    p_mom.set_defaults(fn=_cmd_moments)

    p_exp = sub.add_parser("experiment", help="full multi-run reproduction")
    _add_common(p_exp)
    p_exp.set_defaults(fn=_cmd_experiment)

    p_ks = sub.add_parser("kstest", help="distribution-equality test")
    p_ks.add_argument("--config-a", required=True)
    p_ks.add_argument("--config-b", required=True)
    p_ks.add_argument("--level", type=float, default=0.05)
    p_ks.add_argument("--seed", type=int, default=None)
    p_ks.add_argument("--runs", type=int, default=None)
    p_ks.add_argument("--out", default=None)
    p_ks.add_argument("--workers", type=int, default=None)
    p_ks.set_defaults(fn=_cmd_kstest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DyncluError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
