import json
import warnings
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from harness.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main, summary_table
from harness.config import THREADS_ENV


def write_config(tmp_path: Path, name: str = "soft_chain", **overrides) -> Path:
    data = {"name": name, "n": 3, "d": 5, "samples_per_env": 2000, "trials": 2, "seed": 1,
            "workers": 1, "output_dir": str(tmp_path / "results" / name)}
    data.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


@pytest.fixture
def linear_diamond(tmp_path):
    return write_config(tmp_path, "linear_diamond", n=4, d=4, graph_kind="diamond",
                        mechanism="linear", trials=1)


class TestUsage:
    def test_unknown_command(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_required_option(self):
        assert main(["simulate", "--out", "x"]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["experiment", "--config", str(tmp_path / "none.cfg")]) == EXIT_USAGE
        assert "Config error" in capsys.readouterr().err

    def test_help(self):
        assert main(["--help"]) == EXIT_OK


class TestSimulateAndRecover:
    def test_round_trip_with_truth(self, tmp_path):
        cfg = write_config(tmp_path)
        data_dir = tmp_path / "data"
        assert main(["simulate", "--config", str(cfg), "--out", str(data_dir)]) == EXIT_OK
        assert (data_dir / "meta.json").is_file()
        assert (data_dir / "S_3.csv").is_file()

        report_path = tmp_path / "report.json"
        heatmap = tmp_path / "delta.png"
        assert main(["recover", "--data", str(data_dir), "--truth", "--out", str(report_path),
                     "--heatmap", str(heatmap), "--strict"]) == EXIT_OK
        report = json.loads(report_path.read_text())
        assert report["status"] == "success"
        assert report["recovery"]["dag_recovered"] is True
        assert report["recovery"]["delta"] == ["110", "011", "001"]
        assert report["mixing"]["mixing_residual"] < 1e-6
        assert heatmap.is_file()

    def test_recover_to_stdout_without_truth(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        data_dir = tmp_path / "data"
        main(["simulate", "--config", str(cfg), "--out", str(data_dir)])
        capsys.readouterr()
        assert main(["recover", "--data", str(data_dir)]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["status"] == "success"
        assert "H" not in payload["recovery"]

    def test_truth_needs_stored_mixing(self, tmp_path):
        cfg = write_config(tmp_path)
        data_dir = tmp_path / "data"
        main(["simulate", "--config", str(cfg), "--out", str(data_dir)])
        meta_path = data_dir / "meta.json"
        meta = json.loads(meta_path.read_text())
        del meta["T"]
        meta_path.write_text(json.dumps(meta))
        assert main(["recover", "--data", str(data_dir), "--truth"]) == EXIT_USAGE

    def test_strict_recovery_failure(self, tmp_path, linear_diamond):
        data_dir = tmp_path / "data"
        main(["simulate", "--config", str(linear_diamond), "--out", str(data_dir)])
        out = tmp_path / "report.json"
        assert main(["recover", "--data", str(data_dir), "--out", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["status"] == "identifiability_failure"
        assert main(["recover", "--data", str(data_dir), "--strict"]) == EXIT_FAILED

    def test_missing_dataset(self, tmp_path):
        assert main(["recover", "--data", str(tmp_path / "none")]) == 1
        assert main(["recover", "--data", str(tmp_path / "none"), "--strict"]) == EXIT_FAILED


class TestAudit:
    def test_passing_model(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "audit.json"
        assert main(["audit", "--config", str(cfg), "--json", str(out), "--strict"]) == EXIT_OK
        assert "coverage: ok" in capsys.readouterr().out
        assert json.loads(out.read_text())["passed"] is True

    def test_strict_failure(self, linear_diamond, capsys):
        assert main(["audit", "--config", str(linear_diamond)]) == EXIT_OK
        assert "V-matrix rank" in capsys.readouterr().out
        assert main(["audit", "--config", str(linear_diamond), "--strict"]) == EXIT_FAILED


class TestExperimentAndReport:
    def test_experiment_then_report(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "run"
        assert main(["experiment", "--config", str(cfg), "--out", str(out), "--strict"]) == EXIT_OK
        assert (out / "results.csv").is_file()
        assert "success rate 1.00" in capsys.readouterr().out

        tsv = tmp_path / "table.tsv"
        plot = tmp_path / "report.png"
        assert main(["report", str(out), "--tsv", str(tsv), "--plot", str(plot)]) == EXIT_OK
        printed = capsys.readouterr().out
        assert "soft_chain" in printed
        assert tsv.read_text().splitlines()[0].split("\t")[0] == "trial"
        assert plot.is_file()

    def test_strict_experiment_failure(self, tmp_path, linear_diamond):
        out = tmp_path / "run"
        assert main(["experiment", "--config", str(linear_diamond), "--out", str(out)]) == EXIT_OK
        assert main(["experiment", "--config", str(linear_diamond), "--out", str(out),
                     "--strict"]) == EXIT_FAILED

    def test_report_needs_results(self, tmp_path):
        assert main(["report", str(tmp_path)]) == EXIT_USAGE


def test_summary_table_treats_missing_verdicts_as_inexact():
    frame = pd.DataFrame({
        "experiment": ["a", "a", "a"],
        "status": ["success", "success", "error"],
        "dag_exact": [True, False, np.nan],
        "min_corr": [0.999, 0.995, np.nan],
        "mixing_residual": [0.001, 0.003, np.nan],
    })
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        table = summary_table(frame)
    assert table.loc["a", "trials"] == 3
    assert table.loc["a", "dag_exact_rate"] == pytest.approx(1 / 3)
    assert table.loc["a", "success_rate"] == pytest.approx(2 / 3)
