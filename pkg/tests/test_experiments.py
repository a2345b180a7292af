"""Experiment harness: config validation, output formats, CLI, determinism."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from forecast_arena.experiments import (
    ConfigError,
    InfeasibleScaleError,
    auto_learning_rate,
    build_distribution,
    default_config,
    event_complexity,
    load_config_file,
    parse_config,
    run_experiment,
)
from forecast_arena.experiments.cli import main as cli_main
from forecast_arena.experiments.config import check_scale
from forecast_arena.experiments.output import format_value, write_csv, write_plotdata


class TestConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            parse_config({"experiment": "selection", "trails": 10})

    def test_experiment_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="requested"):
            parse_config({"experiment": "selection"}, "tightness")

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            parse_config({"experiment": "jousting"})

    def test_defaults_fill_in(self):
        cfg = default_config("complexity")
        assert cfg.n == 4 and cfg.b == 1
        assert cfg.epsilon == 0.2 and cfg.delta == 0.2
        assert cfg.c == pytest.approx(0.2 / 20)
        assert cfg.m_list == [event_complexity(4, 1, 0.2, 0.2)]

    def test_auto_learning_rate_exact(self):
        cfg = default_config("complexity")
        assert cfg.resolved_eta() == cfg.epsilon / (80.0 * cfg.b)
        assert auto_learning_rate(0.2, 1) == 0.2 / 80.0

    def test_event_complexity_formula(self):
        want = math.ceil(400 * math.log(8 * 4 / 0.2) / 0.2**2)
        assert event_complexity(4, 1, 0.2, 0.2) == want
        assert event_complexity(4, 3, 0.2, 0.2) == math.ceil(
            400 * 9 * math.log(160) / 0.04
        )

    def test_tightness_divisibility(self):
        with pytest.raises(ConfigError, match="divide"):
            parse_config({"experiment": "tightness", "m": 100, "b_list": [1, 3]})

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment": "selection", "trials": 7, "seed": 3}))
        cfg = load_config_file(path)
        assert cfg.trials == 7 and cfg.seed == 3

    def test_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="JSON"):
            load_config_file(path)

    def test_scale_cap(self):
        cfg = parse_config({"experiment": "selection", "trials": 10_000_000, "m": 1000})
        with pytest.raises(InfeasibleScaleError):
            check_scale(cfg, force=False)
        check_scale(cfg, force=True)

    def test_complexity_strategy_validation(self):
        with pytest.raises(ConfigError, match="strategy"):
            parse_config({"experiment": "complexity", "strategy": "best-response"})


class TestBuildDistribution:
    def test_unknown_family(self):
        with pytest.raises(ConfigError, match="unknown family"):
            build_distribution({"family": "copula"})

    def test_unknown_family_keys(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            build_distribution({"family": "independent", "m": 3, "theta": 0.5, "rho": 1})

    def test_scalar_theta_broadcast(self):
        dist = build_distribution({"family": "independent", "m": 4, "theta": 0.25})
        assert dist.marginals().tolist() == [0.25] * 4

    def test_parameter_errors_become_config_errors(self):
        with pytest.raises(ConfigError, match="bad hidden-coin-groups"):
            build_distribution({"family": "hidden-coin-groups", "m": 5, "b": 2, "c": 0.1})


class TestOutput:
    def test_float_formatting_round_trips(self):
        v = 0.1234567890123456789
        assert float(format_value(v)) == v
        assert format_value(True) == "true"
        assert format_value(3) == "3"

    def test_write_csv_layout(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, ["a", "b"], [{"a": 1, "b": 0.5}, {"a": 2, "b": 1.0 / 3.0}])
        text = path.read_text()
        lines = text.strip().split("\n")
        assert lines[0] == "a,b"
        assert lines[1] == "1,0.5"
        assert float(lines[2].split(",")[1]) == 1.0 / 3.0

    def test_write_plotdata(self, tmp_path):
        out = tmp_path / "run.csv"
        files = write_plotdata(out, {"series": ([1, 2], [0.5, 0.25])})
        assert files[0].name == "run__series.dat"
        assert files[0].read_text() == "1 0.5\n2 0.25\n"


def _small_cfg(experiment, **over):
    cfg = default_config(experiment)
    cfg.trials = over.pop("trials", 400)
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


class TestDeterminism:
    def test_rerun_is_identical(self, tmp_path):
        rows = []
        for run in range(2):
            res = run_experiment(_small_cfg("selection", seed=5))
            p = tmp_path / f"run{run}.csv"
            write_csv(p, res.columns, res.rows)
            rows.append(p.read_bytes())
        assert rows[0] == rows[1]

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        blobs = []
        for workers in (1, 2):
            cfg = _small_cfg("selection", trials=2048, seed=9)
            cfg.workers = workers
            res = run_experiment(cfg)
            p = tmp_path / f"w{workers}.csv"
            write_csv(p, res.columns, res.rows)
            blobs.append(p.read_bytes())
        assert blobs[0] == blobs[1]

    def test_different_seeds_differ(self):
        a = run_experiment(_small_cfg("selection", seed=1)).trial_rows[5]
        b = run_experiment(_small_cfg("selection", seed=2)).trial_rows[5]
        assert a["y_digest"] != b["y_digest"]


class TestRunners:
    def test_selection_row_schema(self):
        res = run_experiment(_small_cfg("selection"))
        row = res.rows[0]
        assert row["trials"] == 400
        assert {"frequency", "wilson_low", "wilson_high", "passed"} <= set(row)
        assert len(res.trial_rows) == 400

    def test_concentration_all_fixture_rows(self):
        res = run_experiment(_small_cfg("concentration"))
        assert [r["fixture"] for r in res.rows] == [
            "independent-m100",
            "hidden-coin-groups-m120-b6-c0.1",
            "random-bias-m12",
        ]
        assert all("wilson_high" in r for r in res.rows)

    def test_chain_check_rows(self):
        res = run_experiment(_small_cfg("chain-check", trials=1500))
        checks = {r["check"] for r in res.rows}
        assert {
            "telescope_identity",
            "x_range",
            "e_range",
            "x_mean_matches_event",
            "level_law_preserved",
            "proxy_tail_vs_mean",
            "proxy_tail_vs_sum",
        } <= checks
        assert res.passed

    def test_complexity_small_scale_runs(self):
        cfg = _small_cfg("complexity", trials=64)
        cfg.m_list = [512]
        res = run_experiment(cfg)
        assert res.rows[0]["m"] == 512
        assert res.rows[0]["m_star"] == event_complexity(4, 1, 0.2, 0.2)

    def test_truthfulness_restricted_grid(self):
        cfg = default_config("truthfulness")
        cfg.etas = [0.01]
        cfg.n_list = [2]
        cfg.fixtures = ["independent-m3"]
        cfg.opponent_draws = 1
        res = run_experiment(cfg)
        assert len(res.rows) == 1
        assert res.rows[0]["passed"]


class TestCli:
    def test_end_to_end_files(self, tmp_path):
        out = tmp_path / "sel.csv"
        code = cli_main(
            [
                "selection",
                "--trials",
                "300",
                "--seed",
                "4",
                "--out",
                str(out),
                "--emit-trials",
                "--emit-plotdata",
            ]
        )
        assert code == 0
        assert out.exists()
        assert out.with_suffix(".png").exists()
        assert (tmp_path / "sel__trials.csv").exists()
        assert any(tmp_path.glob("sel__*.dat"))

    def test_no_plot(self, tmp_path):
        out = tmp_path / "sel.csv"
        code = cli_main(["selection", "--trials", "200", "--out", str(out), "--no-plot"])
        assert code == 0
        assert not out.with_suffix(".png").exists()

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"experiment": "selection", "bogus": 1}))
        assert cli_main(["selection", "--config", str(cfg)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert cli_main(["selection", "--config", str(tmp_path / "none.json")]) == 2

    def test_infeasible_exit_code(self, tmp_path):
        cfg = tmp_path / "big.json"
        cfg.write_text(
            json.dumps({"experiment": "selection", "trials": 10_000_000, "m": 1000})
        )
        assert cli_main(["selection", "--config", str(cfg)]) == 3

    def test_config_and_subcommand_must_match(self, tmp_path):
        cfg = tmp_path / "sel.json"
        cfg.write_text(json.dumps({"experiment": "selection"}))
        assert cli_main(["tightness", "--config", str(cfg)]) == 2
