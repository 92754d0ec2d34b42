import json

import numpy as np
import pytest

from dynclu.cli import main
from dynclu.errors import ConfigError
from dynclu.experiment import (
    analytic_moments,
    load_config,
    parse_config,
    read_runs_csv,
    run_equality_test,
    run_experiment,
    run_seed,
)
from conftest import preset


def tiny_config(seed=9, runs=3, k=600):
    return parse_config(
        {
            "model": {"family": "exp_on", "theta": 1.0, "gamma": 3.0, "mu": 0.5, "n": 6},
            "scheme": {"kind": "poisson", "xi": 5.0, "k": k},
            "runs": runs,
            "seed": seed,
        }
    )


def write_tiny_config(path, seed=9, runs=2, k=400, n=6):
    payload = {
        "model": {"family": "exp_on", "theta": 1.0, "gamma": 3.0, "mu": 0.5, "n": n},
        "scheme": {"kind": "poisson", "xi": 5.0, "k": k},
        "runs": runs,
        "seed": seed,
    }
    path.write_text(json.dumps(payload))
    return path


# --- config parsing -------------------------------------------------------------


def test_parse_all_presets():
    for name in (
        "exp_equidistant_desk.json",
        "exp_poisson_desk.json",
        "weibull_poisson_desk.json",
        "pareto_poisson_desk.json",
        "equality_exp_desk.json",
        "equality_pareto_desk.json",
        "inout_poisson_desk.json",
    ):
        config = load_config(preset(name))
        assert config.runs >= 100


def test_unknown_keys_are_hard_errors():
    base = {
        "model": {"family": "exp_on", "theta": 1.0, "gamma": 3.0, "mu": 0.5, "n": 6},
        "scheme": {"kind": "poisson", "xi": 5.0, "k": 100},
        "runs": 2,
        "seed": 1,
    }
    with pytest.raises(ConfigError):
        parse_config({**base, "typo": 1})
    bad_model = dict(base["model"], extra=2)
    with pytest.raises(ConfigError):
        parse_config({**base, "model": bad_model})
    bad_scheme = {"kind": "poisson", "xi": 5.0, "k": 100, "delta": 0.1}
    with pytest.raises(ConfigError):
        parse_config({**base, "scheme": bad_scheme})


def test_missing_and_invalid_values():
    with pytest.raises(ConfigError):
        parse_config({"model": {}, "scheme": {}, "runs": 1})
    with pytest.raises(ConfigError):
        parse_config(
            {
                "model": {"family": "nope", "n": 5},
                "scheme": {"kind": "poisson", "xi": 1.0, "k": 10},
                "runs": 1,
                "seed": 0,
            }
        )
    with pytest.raises(ConfigError):
        parse_config(
            {
                "model": {"family": "exp_on", "theta": 1.0, "gamma": 3.0, "mu": 0.5, "n": 5},
                "scheme": {"kind": "weekly", "k": 10},
                "runs": 1,
                "seed": 0,
            }
        )


def test_run_seed_is_stable():
    assert run_seed(101, 0) == run_seed(101, 0)
    assert run_seed(101, 0) != run_seed(101, 1)
    assert run_seed(101, 5) != run_seed(102, 5)


# --- experiment runner ------------------------------------------------------------


def test_experiment_deterministic_and_workers_equivalent(tmp_path):
    config = tiny_config()
    r1 = run_experiment(config, out_dir=tmp_path / "a", workers=1)
    r2 = run_experiment(config, out_dir=tmp_path / "b", workers=2)
    assert (tmp_path / "a" / "runs.csv").read_bytes() == (
        tmp_path / "b" / "runs.csv"
    ).read_bytes()
    assert r1.summary == r2.summary
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["summary"]["n_runs"] == 3


def test_runs_csv_round_trip(tmp_path):
    config = tiny_config()
    report = run_experiment(config, out_dir=tmp_path, workers=1)
    rows = read_runs_csv(tmp_path / "runs.csv")
    assert len(rows) == 3
    for row, rec in zip(rows, report.records):
        assert int(row["run"]) == rec.index
        assert int(row["seed"]) == rec.seed
        assert float(row["theta"]) == rec.result.params[0]
        assert float(row["s_hat"]) == rec.stats.s_hat


def test_experiment_emits_plots_data(tmp_path):
    config = tiny_config(runs=6)
    config = type(config)(**{**config.__dict__, "emit_qq": True, "emit_histograms": True, "bins": 5})
    run_experiment(config, out_dir=tmp_path, workers=1)
    for name in ("theta", "gamma", "mu"):
        hist = (tmp_path / f"hist_{name}.csv").read_text().splitlines()
        assert hist[0] == "x,y"
        qq = (tmp_path / f"qq_{name}.csv").read_text().splitlines()
        assert qq[0] == "x,y"
        # density normalization survives the round trip
        xs, ys = zip(*(line.split(",") for line in hist[1:]))
        xs = np.array([float(v) for v in xs])
        ys = np.array([float(v) for v in ys])
        if xs.size > 1:
            width = xs[1] - xs[0]
            assert float(np.sum(ys) * width) == pytest.approx(1.0, abs=1e-9)


def test_summary_excludes_nonconverged(tmp_path):
    config = tiny_config(runs=4, k=300)
    report = run_experiment(config, workers=1)
    n = report.summary["n_converged"] + report.summary["n_nonconverged"]
    assert n + report.summary["n_failed"] == 4
    if report.summary["n_converged"] >= 2:
        means = report.params_matrix().mean(axis=0)
        assert report.summary["params"]["theta"]["mean"] == pytest.approx(means[0])


def test_analytic_moments_helper():
    config = tiny_config()
    mv = analytic_moments(config)
    assert mv.scheme == "poisson"
    assert mv.s > 0


# --- equality test ------------------------------------------------------------------


def test_equality_same_config_same_seed_degenerate():
    config = tiny_config(seed=77, runs=6)
    result = run_equality_test(config, config, level=0.05)
    assert result.ks_s.statistic == 0.0
    assert not result.ks_s.reject


def test_equality_validation():
    a = tiny_config()
    b = parse_config(
        {
            "model": {"family": "exp_on", "theta": 1.0, "gamma": 3.0, "mu": 0.5, "n": 7},
            "scheme": {"kind": "poisson", "xi": 5.0, "k": 600},
            "runs": 3,
            "seed": 1,
        }
    )
    with pytest.raises(ConfigError):
        run_equality_test(a, b)


def test_equality_writes_report(tmp_path):
    config_a = tiny_config(seed=11, runs=6)
    config_b = tiny_config(seed=12, runs=6)
    run_equality_test(config_a, config_b, out_dir=tmp_path, workers=1)
    payload = json.loads((tmp_path / "equality.json").read_text())
    assert "ks_s_hat" in payload and "ks_rho1_hat" in payload
    assert (tmp_path / "samples_a.csv").exists()


# --- CLI ----------------------------------------------------------------------------


def test_cli_simulate_and_estimate(tmp_path, capsys):
    config_path = write_tiny_config(tmp_path / "config.json")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(config_path), "--out", str(out), "--format", "both"]) == 0
    series_csv = out / "series_0.csv"
    assert series_csv.exists() and (out / "series_0.bin").exists()
    capsys.readouterr()
    assert main(["estimate", "--config", str(config_path), "--series", str(series_csv)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert "theta_hat" in payload and "converged" in payload


def test_cli_simulate_deterministic(tmp_path):
    config_path = write_tiny_config(tmp_path / "config.json")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    main(["simulate", "--config", str(config_path), "--out", str(out1)])
    main(["simulate", "--config", str(config_path), "--out", str(out2)])
    assert (out1 / "series_0.csv").read_bytes() == (out2 / "series_0.csv").read_bytes()


def test_cli_moments(tmp_path, capsys):
    config_path = write_tiny_config(tmp_path / "config.json")
    assert main(["moments", "--config", str(config_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["scheme"] == "poisson"
    assert payload["s"] > 0


def test_cli_experiment_with_overrides(tmp_path, capsys):
    config_path = write_tiny_config(tmp_path / "config.json", runs=5)
    out = tmp_path / "exp"
    code = main(
        [
            "experiment",
            "--config", str(config_path),
            "--out", str(out),
            "--runs", "3",
            "--workers", "1",
            "--seed", "55",
        ]
    )
    assert code == 0
    assert (out / "summary.json").exists()
    rows = read_runs_csv(out / "runs.csv")
    assert len(rows) == 3
    assert int(rows[0]["seed"]) == run_seed(55, 0)


def test_cli_divisor_flag(tmp_path, capsys):
    config_path = write_tiny_config(tmp_path / "config.json")
    main(["moments", "--config", str(config_path)])
    s_m = json.loads(capsys.readouterr().out)["s"]
    main(["moments", "--config", str(config_path), "--divisor", "2m"])
    s_2m = json.loads(capsys.readouterr().out)["s"]
    assert s_2m == pytest.approx(s_m / 2.0, rel=1e-12)


def test_cli_kstest(tmp_path, capsys):
    config_path_a = write_tiny_config(tmp_path / "a.json", seed=21, runs=6)
    config_path_b = write_tiny_config(tmp_path / "b.json", seed=22, runs=6)
    out = tmp_path / "ks"
    code = main(
        [
            "kstest",
            "--config-a", str(config_path_a),
            "--config-b", str(config_path_b),
            "--out", str(out),
            "--workers", "1",
        ]
    )
    assert code == 0
    assert (out / "equality.json").exists()
    assert "KS[s_hat]" in capsys.readouterr().out


def test_cli_error_reporting(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    code = main(["moments", "--config", str(bad)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
