"""CLI subcommands, option merging, output routing, and exit codes."""

from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from onseg.cli import OUT_DIR_ENV, main
from onseg.datasets import Dataset, write_libsvm


QUAD = ["--task", "synthetic-quadratic", "--dim", "2",
        "--diameter", "2", "--inner-radius", "1"]


@pytest.fixture(autouse=True)
def _no_out_dir(monkeypatch):
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)


@pytest.fixture()
def regression_file(tmp_path):
    rng = np.random.default_rng(173)
    ds = Dataset(Z=rng.standard_normal((12, 3)), y=rng.standard_normal(12))
    p = tmp_path / "reg.libsvm"
    write_libsvm(ds, p)
    return str(p)


@pytest.fixture()
def returns_file(tmp_path):
    rng = np.random.default_rng(179)
    rows = 0.001 * rng.standard_normal((8, 3))
    p = tmp_path / "ret.csv"
    lines = ["a,b,c"] + [",".join(f"{v:.6f}" for v in row) for row in rows]
    p.write_text("\n".join(lines) + "\n")
    return str(p)


class TestRun:
    def test_trial_line_and_trace(self, tmp_path, capsys):
        out = str(tmp_path / "t.csv")
        rc = main(["run", *QUAD, "--algo", "ogdeg", "--T", "32", "--out", out])
        assert rc == 0
        got = capsys.readouterr().out
        assert f"wrote {out}" in got
        assert "trial=0 T=32 final_metric=" in got
        assert "mean_loss=" in got
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "loss", "metric", "regret"]
        assert len(rows) == 33

    def test_regret_flag_adds_column(self, capsys):
        rc = main(["run", *QUAD, "--algo", "ogdeg", "--T", "32", "--regret"])
        assert rc == 0
        assert "final_regret=" in capsys.readouterr().out

    def test_multi_trial_suffixes(self, tmp_path, capsys):
        out = str(tmp_path / "m.csv")
        rc = main(["run", *QUAD, "--algo", "ogd", "--T", "8",
                   "--trials", "2", "--out", out])
        assert rc == 0
        assert (tmp_path / "m_trial0.csv").exists()
        assert (tmp_path / "m_trial1.csv").exists()
        lines = capsys.readouterr().out.strip().splitlines()
        assert sum("trial=" in ln for ln in lines) == 2

    def test_out_dir_env_names_the_trace(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "outputs"))
        rc = main(["run", *QUAD, "--algo", "ogdeg", "--T", "16", "--seed", "5"])
        assert rc == 0
        expect = tmp_path / "outputs" / "synthetic-quadratic_ogdeg_T16_seed5.csv"
        assert expect.exists()
        assert f"wrote {expect}" in capsys.readouterr().out

    def test_explicit_out_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "ignored"))
        out = str(tmp_path / "here.csv")
        assert main(["run", *QUAD, "--algo", "ogd", "--T", "8", "--out", out]) == 0
        assert (tmp_path / "here.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_deterministic_output(self, capsys):
        argv = ["run", *QUAD, "--algo", "onseg", "--T", "64", "--seed", "9"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first


class TestCompare:
    def test_stdout_csv_with_all_algos(self, capsys):
        rc = main(["compare", *QUAD, "--T", "16"])
        assert rc == 0
        rows = list(csv.reader(capsys.readouterr().out.strip().splitlines()))
        assert rows[0] == [
            "t",
            "onseg_loss", "onseg_metric",
            "ogdeg_loss", "ogdeg_metric",
            "ons_loss", "ons_metric",
            "ogd_loss", "ogd_metric",
        ]
        assert len(rows) == 17
        assert rows[1][0] == "1" and rows[-1][0] == "16"

    def test_algo_subset_and_regret(self, tmp_path, capsys):
        out = str(tmp_path / "cmp.csv")
        rc = main(["compare", *QUAD, "--T", "16", "--algos", "onseg,ogdeg",
                   "--regret", "--out", out])
        assert rc == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "t",
            "onseg_loss", "onseg_metric", "onseg_regret",
            "ogdeg_loss", "ogdeg_metric", "ogdeg_regret",
        ]

    def test_portfolio_defaults_to_bandits(self, returns_file, capsys):
        rc = main(["compare", "--task", "portfolio", "--data", returns_file,
                   "--T", "8"])
        assert rc == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert header == "t,onseg_loss,onseg_metric,ogdeg_loss,ogdeg_metric"

    def test_unknown_algo_rejected(self, capsys):
        assert main(["compare", *QUAD, "--T", "16", "--algos", "sgd"]) == 2


class TestSweep:
    def test_horizon_grid(self, capsys):
        rc = main(["sweep", *QUAD, "--algo", "ogdeg", "--param", "T",
                   "--values", "8,16"])
        assert rc == 0
        rows = list(csv.reader(capsys.readouterr().out.strip().splitlines()))
        assert rows[0] == ["T", "rounds", "final_metric_mean", "final_metric_std"]
        assert [r[0] for r in rows[1:]] == ["8", "16"]
        assert [r[1] for r in rows[1:]] == ["8", "16"]

    def test_delta_grid_with_regret(self, capsys):
        rc = main(["sweep", *QUAD, "--algo", "onseg", "--param", "delta",
                   "--values", "0.01,0.02", "--T", "32", "--regret"])
        assert rc == 0
        rows = list(csv.reader(capsys.readouterr().out.strip().splitlines()))
        assert rows[0] == ["delta", "rounds", "final_metric_mean",
                           "final_metric_std", "final_regret_mean"]
        assert len(rows) == 3

    def test_missing_values_rejected(self, capsys):
        assert main(["sweep", *QUAD, "--algo", "ogdeg", "--param", "T"]) == 2


class TestBounds:
    def test_regression_bounds(self, regression_file, capsys):
        rc = main(["bounds", "--task", "regression", "--data", regression_file,
                   "--diameter", "2", "--inner-radius", "1"])
        assert rc == 0
        got = dict(line.split() for line in capsys.readouterr().out.splitlines())
        assert got["n"] == "12" and got["d"] == "3"
        assert float(got["F"]) > 0 and float(got["G"]) > 0
        assert got["L"] == got["G"]

    def test_synthetic_bounds_without_data(self, capsys):
        rc = main(["bounds", *QUAD])
        assert rc == 0
        got = capsys.readouterr().out
        assert got.startswith("d 2\n")


class TestConfigFile:
    def test_json_defaults_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "task": "synthetic-quadratic", "algo": "ogdeg", "T": 64,
            "seed": 7, "dim": 2, "diameter": 2.0, "inner-radius": 1.0,
        }))
        rc = main(["run", "--config", str(cfg), "--T", "16"])
        assert rc == 0
        merged = capsys.readouterr().out
        assert "T=16" in merged
        rc = main(["run", *QUAD, "--algo", "ogdeg", "--T", "16", "--seed", "7"])
        assert rc == 0
        assert capsys.readouterr().out == merged

    def test_data_key_normalization(self, tmp_path, regression_file, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "task": "regression", "data": regression_file,
            "diameter": 2.0, "inner-radius": 1.0,
        }))
        assert main(["bounds", "--config", str(cfg)]) == 0

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"task": "regression", "learning_rate": 0.1}))
        assert main(["run", "--config", str(cfg), "--algo", "ogd"]) == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_invalid_json_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


class TestExitCodes:
    def test_success_is_zero(self):
        assert main(["run", *QUAD, "--algo", "ogd", "--T", "4"]) == 0

    def test_usage_errors_are_two(self, capsys):
        assert main(["run", *QUAD, "--algo", "ogdeg", "--not-a-flag"]) == 2
        assert main(["frobnicate"]) == 2
        assert main(["run", "--algo", "ogdeg"]) == 2  # --task missing
        assert main(["run", *QUAD]) == 2  # --algo missing
        assert main(["run", *QUAD, "--algo", "ogd", "--delta", "0.1"]) == 2
        assert main(["run", *QUAD, "--algo", "onseg", "--T", "1"]) == 2

    def test_data_errors_are_three(self, tmp_path, capsys):
        missing = str(tmp_path / "absent.libsvm")
        assert main(["run", "--task", "regression", "--algo", "ogd",
                     "--data", missing, "--T", "4"]) == 3
        bad = tmp_path / "bad.libsvm"
        bad.write_text("1 nocolon\n")
        assert main(["run", "--task", "regression", "--algo", "ogd",
                     "--data", str(bad), "--T", "4"]) == 3
        err = capsys.readouterr().err
        assert "error:" in err

    def test_help_is_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "run" in capsys.readouterr().out


class TestSubprocess:
    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "onseg.cli", "run", *QUAD,
             "--algo", "ogdeg", "--T", "16"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert "trial=0 T=16" in proc.stdout
