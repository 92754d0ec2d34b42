"""Experiment orchestration: seeded run fan-out, aggregation, reports.

A config names a model family with its true parameters, a sampling
scheme, a run count and a root seed.  Each run gets its own seed derived
from the root by index, so reports are identical no matter how many
workers execute the runs.  Summaries average the converged runs only;
failed or non-converged runs are counted separately.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DyncluError, SingularJacobian
from .estimator import (
    EstimationResult,
    InOutFamily,
    ModelFamily,
    MomentStats,
    SymmetricFamily,
    compute_stats,
    delta_method_cov,
    empirical_sigma,
    solve_moments,
)
from .moments import model_moments
from .simulate import Equidistant, PoissonTimes, SamplingScheme, simulate
from .stats_tests import KsVerdict, histogram_density, ks_two_sample, qq_points, write_xy_csv

_TOP_KEYS = {"model", "scheme", "runs", "seed", "out", "emit_qq", "emit_histograms", "bins"}
_SCHEME_KEYS = {"equidistant": {"kind", "delta", "k"}, "poisson": {"kind", "xi", "k"}}
_MODEL_KEYS = {
    "exp_on": {"family", "theta", "gamma", "mu", "n", "divisor"},
    "exp_off": {"family", "theta", "gamma", "lambda", "n", "divisor"},
    "weibull_off": {"family", "theta", "gamma", "alpha", "n", "divisor"},
    "pareto_off": {"family", "theta", "gamma", "alpha", "n", "divisor"},
    "in_out": {"family", "theta1", "gamma1", "gamma2", "mu", "n", "divisor"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    family: ModelFamily
    truth: tuple
    scheme: SamplingScheme
    runs: int
    seed: int
    out: Optional[str] = None
    emit_qq: bool = False
    emit_histograms: bool = False
    bins: int = 30


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def _require(block: dict, keys, where: str) -> None:
    missing = [k for k in keys if k not in block]
    if missing:
        raise ConfigError(f"missing {where} keys: {missing}")


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict; unknown keys are a hard error."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "top-level")
    _require(raw, ("model", "scheme", "runs", "seed"), "top-level")

    model = raw["model"]
    family_name = model.get("family")
    if family_name not in _MODEL_KEYS:
        raise ConfigError(
            f"model.family must be one of {sorted(_MODEL_KEYS)}, got {family_name!r}"
        )
    _reject_unknown(model, _MODEL_KEYS[family_name], "model")
    divisor = model.get("divisor", "m")
    n = int(model["n"])
    if family_name == "in_out":
        _require(model, ("theta1", "gamma1", "gamma2", "mu", "n"), "model")
        family = InOutFamily(theta_plus=float(model["theta1"]), n=n, divisor=divisor)
        truth = (float(model["gamma1"]), float(model["gamma2"]), float(model["mu"]))
    else:
        side, kind = {
            "exp_on": ("on", "exponential"),
            "exp_off": ("off", "exponential"),
            "weibull_off": ("off", "weibull"),
            "pareto_off": ("off", "pareto"),
        }[family_name]
        zeta_key = {"exp_on": "mu", "exp_off": "lambda"}.get(family_name, "alpha")
        _require(model, ("theta", "gamma", zeta_key, "n"), "model")
        family = SymmetricFamily(
            homogeneous_side=side, dist_kind=kind, n=n, divisor=divisor
        )
        truth = (float(model["theta"]), float(model["gamma"]), float(model[zeta_key]))

    scheme_block = raw["scheme"]
    kind = scheme_block.get("kind")
    if kind not in _SCHEME_KEYS:
        raise ConfigError(f"scheme.kind must be 'equidistant' or 'poisson', got {kind!r}")
    _reject_unknown(scheme_block, _SCHEME_KEYS[kind], "scheme")
    if kind == "equidistant":
        _require(scheme_block, ("delta", "k"), "scheme")
        scheme = Equidistant(delta=float(scheme_block["delta"]), k=int(scheme_block["k"]))
    else:
        _require(scheme_block, ("xi", "k"), "scheme")
        scheme = PoissonTimes(xi=float(scheme_block["xi"]), k=int(scheme_block["k"]))

    return ExperimentConfig(
        family=family,
        truth=truth,
        scheme=scheme,
        runs=int(raw["runs"]),
        seed=int(raw["seed"]),
        out=raw.get("out"),
        emit_qq=bool(raw.get("emit_qq", False)),
        emit_histograms=bool(raw.get("emit_histograms", False)),
        bins=int(raw.get("bins", 30)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(json.load(fh))


def run_seed(root_seed: int, index: int) -> int:
    """Per-run seed derived from the root by a counter-keyed split."""
    ss = np.random.SeedSequence(root_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunRecord:
    index: int
    seed: int
    stats: Optional[MomentStats]
    result: Optional[EstimationResult]
    error: Optional[str]


def _run_estimation(args) -> RunRecord:
    config, index = args
    seed = run_seed(config.seed, index)
    try:
        spec = config.family.build_spec(*config.truth)
        series = simulate(spec, config.scheme, seed)
        stats = compute_stats(series)
        result = solve_moments(stats, config.family, config.scheme)
        return RunRecord(index=index, seed=seed, stats=stats, result=result, error=None)
    except DyncluError as err:
        return RunRecord(index=index, seed=seed, stats=None, result=None, error=repr(err))


def _run_stats_only(args) -> RunRecord:
    config, index = args
    seed = run_seed(config.seed, index)
    try:
        spec = config.family.build_spec(*config.truth)
        series = simulate(spec, config.scheme, seed)
        stats = compute_stats(series)
        return RunRecord(index=index, seed=seed, stats=stats, result=None, error=None)
    except DyncluError as err:
        return RunRecord(index=index, seed=seed, stats=None, result=None, error=repr(err))


def _map_runs(fn, config, workers):
    jobs = [(config, index) for index in range(config.runs)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [fn(job) for job in jobs]
    records.sort(key=lambda rec: rec.index)
    return records


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    records: list
    summary: dict
    sigma_hat: Optional[np.ndarray]
    delta_cov: Optional[np.ndarray]
    notes: tuple

    def converged_records(self):
        return [
            rec
            for rec in self.records
            if rec.result is not None and rec.result.solver.converged
        ]

    def params_matrix(self) -> np.ndarray:
        return np.array([rec.result.params for rec in self.converged_records()])


def run_experiment(
    config: ExperimentConfig, out_dir=None, workers: int = 1
) -> ExperimentReport:
    """Fan out the seeded runs, aggregate, and optionally write reports."""
    records = _map_runs(_run_estimation, config, workers)
    converged = [
        rec for rec in records if rec.result is not None and rec.result.solver.converged
    ]
    n_failed = sum(1 for rec in records if rec.error is not None)
    n_nonconverged = len(records) - len(converged) - n_failed
    notes = []

    names = config.family.param_names
    summary = {
        "n_runs": len(records),
        "n_converged": len(converged),
        "n_failed": n_failed,
        "n_nonconverged": n_nonconverged,
        "params": {},
    }
    sigma_hat = None
    delta_cov = None
    if len(converged) >= 2:
        params = np.array([rec.result.params for rec in converged])
        means = params.mean(axis=0)
        stds = params.std(axis=0, ddof=1)
        sigma_hat = empirical_sigma([rec.stats for rec in converged], config.scheme.k)
        delta_std = [None, None, None]
        try:
            delta_cov = delta_method_cov(means, config.family, config.scheme, sigma_hat)
            delta_std = list(np.sqrt(np.diag(delta_cov) / config.scheme.k))
        except SingularJacobian as err:
            notes.append(f"delta-method covariance unavailable: {err}")
        for j, name in enumerate(names):
            summary["params"][name] = {
                "mean": float(means[j]),
                "std": float(stds[j]),
                "delta_std": None if delta_std[j] is None else float(delta_std[j]),
            }
    else:
        notes.append("fewer than two converged runs; no summary statistics")

    report = ExperimentReport(
        config=config,
        records=records,
        summary=summary,
        sigma_hat=sigma_hat,
        delta_cov=delta_cov,
        notes=tuple(notes),
    )
    if out_dir is not None:
        _write_report(report, out_dir)
    return report


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _write_runs_csv(report: ExperimentReport, path) -> None:
    names = report.config.family.param_names
    with open(path, "w") as fh:
        fh.write(
            "run,seed," + ",".join(names)
            + ",converged,residual,iterations,s_hat,rho1_hat,rho2_hat,error\n"
        )
        for rec in report.records:
            if rec.result is not None:
                p = [repr(float(v)) for v in rec.result.params]
                solver = rec.result.solver
                tail = [
                    str(int(solver.converged)),
                    repr(solver.residual_norm),
                    str(solver.iterations),
                    _fmt(rec.stats.s_hat),
                    _fmt(rec.stats.rho1_hat),
                    _fmt(rec.stats.rho2_hat),
                    "",
                ]
            else:
                p = ["", "", ""]
                tail = ["", "", "", "", "", "", rec.error or ""]
            fh.write(f"{rec.index},{rec.seed}," + ",".join(p + tail) + "\n")


def read_runs_csv(path):
    """Parse runs.csv back into plain dict rows (loss-free round trip)."""
    import csv

    with open(path) as fh:
        return list(csv.DictReader(fh))


def _config_echo(config: ExperimentConfig) -> dict:
    family = config.family
    scheme = config.scheme
    echo = {
        "runs": config.runs,
        "seed": config.seed,
        "truth": list(config.truth),
        "n": family.n,
        "divisor": family.divisor,
        "param_names": list(family.param_names),
    }
    if isinstance(family, SymmetricFamily):
        echo["family"] = f"{family.dist_kind}_{family.homogeneous_side}"
    else:
        echo["family"] = "in_out"
        echo["theta1"] = family.theta_plus
    if isinstance(scheme, Equidistant):
        echo["scheme"] = {"kind": "equidistant", "delta": scheme.delta, "k": scheme.k}
    else:
        echo["scheme"] = {"kind": "poisson", "xi": scheme.xi, "k": scheme.k}
    return echo


def _write_report(report: ExperimentReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_runs_csv(report, os.path.join(out_dir, "runs.csv"))
    payload = {
        "config": _config_echo(report.config),
        "summary": report.summary,
        "sigma_hat": None
        if report.sigma_hat is None
        else [list(map(float, row)) for row in report.sigma_hat],
        "delta_cov": None
        if report.delta_cov is None
        else [list(map(float, row)) for row in report.delta_cov],
        "notes": list(report.notes),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    config = report.config
    if (config.emit_histograms or config.emit_qq) and report.summary["n_converged"] >= 2:
        params = report.params_matrix()
        for j, name in enumerate(config.family.param_names):
            column = params[:, j]
            if config.emit_histograms:
                centers, density = histogram_density(column, config.bins)
                write_xy_csv(os.path.join(out_dir, f"hist_{name}.csv"), centers, density)
            if config.emit_qq:
                std = float(np.std(column, ddof=1))
                if std > 0:
                    points = qq_points(column, float(np.mean(column)), std)
                    write_xy_csv(
                        os.path.join(out_dir, f"qq_{name}.csv"),
                        points[:, 0],
                        points[:, 1],
                    )


@dataclass(frozen=True)
class EqualityReport:
    report_a: ExperimentReport
    report_b: ExperimentReport
    ks_s: KsVerdict
    ks_rho1: KsVerdict
    mean_s_a: float
    mean_s_b: float


def run_equality_test(
    config_a: ExperimentConfig,
    config_b: ExperimentConfig,
    level: float = 0.05,
    out_dir=None,
    workers: int = 1,
) -> EqualityReport:
    """Distribution-equality procedure on the mean-count statistic.

    Simulates both models run-for-run, collects the per-run mean and
    lag-1 covariance statistics, and applies the two-sample KS test to
    each collection.
    """
    if config_a.family.n != config_b.family.n:
        raise ConfigError("equality test requires matching N")
    if config_a.scheme != config_b.scheme:
        raise ConfigError("equality test requires matching sampling schemes")
    if config_a.runs != config_b.runs:
        raise ConfigError("equality test requires matching run counts")

    sides = {}
    for label, config in (("a", config_a), ("b", config_b)):
        records = _map_runs(_run_stats_only, config, workers)
        good = [rec for rec in records if rec.stats is not None]
        sides[label] = {
            "records": records,
            "s": np.array([rec.stats.s_hat for rec in good]),
            "rho1": np.array([rec.stats.rho1_hat for rec in good]),
        }

    ks_s = ks_two_sample(sides["a"]["s"], sides["b"]["s"], level)
    ks_rho1 = ks_two_sample(sides["a"]["rho1"], sides["b"]["rho1"], level)
    reports = {}
    for label, config in (("a", config_a), ("b", config_b)):
        records = sides[label]["records"]
        summary = {
            "n_runs": len(records),
            "n_failed": sum(1 for rec in records if rec.error is not None),
            "mean_s_hat": float(np.mean(sides[label]["s"])),
            "mean_rho1_hat": float(np.mean(sides[label]["rho1"])),
        }
        reports[label] = ExperimentReport(
            config=config,
            records=records,
            summary=summary,
            sigma_hat=None,
            delta_cov=None,
            notes=(),
        )

    result = EqualityReport(
        report_a=reports["a"],
        report_b=reports["b"],
        ks_s=ks_s,
        ks_rho1=ks_rho1,
        mean_s_a=float(np.mean(sides["a"]["s"])),
        mean_s_b=float(np.mean(sides["b"]["s"])),
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        payload = {
            "config_a": _config_echo(config_a),
            "config_b": _config_echo(config_b),
            "mean_s_hat": [result.mean_s_a, result.mean_s_b],
            "ks_s_hat": _verdict_dict(ks_s),
            "ks_rho1_hat": _verdict_dict(ks_rho1),
        }
        with open(os.path.join(out_dir, "equality.json"), "w") as fh:
            json.dump(payload, fh, indent=2)
        for label in ("a", "b"):
            write_xy_csv(
                os.path.join(out_dir, f"samples_{label}.csv"),
                sides[label]["s"],
                sides[label]["rho1"],
            )
    return result


def _verdict_dict(verdict: KsVerdict) -> dict:
    return {
        "statistic": verdict.statistic,
        "p_value": verdict.p_value,
        "reject": verdict.reject,
        "n1": verdict.n1,
        "n2": verdict.n2,
        "level": verdict.level,
    }


def analytic_moments(config: ExperimentConfig):
    """Analytic moment vector of the configured model and scheme."""
    spec = config.family.build_spec(*config.truth)
    return model_moments(spec, config.scheme)
