"""End-to-end tests of the command-line subcommands on a coarse flat run."""

import csv
import json

import pytest
from click.testing import CliRunner

from macroipm.cli import cli
from macroipm.provenance import Operation, read_record
from macroipm.run_config import CONFIG_DIR


@pytest.fixture
def invoke(tmp_path, flat_preset, fast_overrides):
    runner = CliRunner()

    def run(command: str, *extra: str, config=flat_preset):
        args = [command, "--config", str(config), "--out", str(tmp_path), *fast_overrides, *extra]
        return runner.invoke(cli, args)

    return run


def test_level_set_chain(invoke, tmp_path):
    result = invoke("solve-levelset")
    assert result.exit_code == 0, result.output
    for name in ("eta_checkpoint.txt", "graph.txt", "convergence.txt"):
        assert (tmp_path / "levelset" / name).exists()

    result = invoke("reconstruct")
    assert result.exit_code == 0, result.output
    fields = tmp_path / "fields" / "levelset"
    for t in ("0.025", "0.05", "0.075", "0.1"):
        for name in ("rho", "v", "m", "curves"):
            assert (fields / f"{name}_t{t}.csv").exists()

    result = invoke("diagnose")
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader((tmp_path / "diagnostics" / "diagnostics.csv").open()))
    assert len(rows) == 4
    assert all(abs(float(r["mass_error"])) < 1e-9 for r in rows)
    assert (tmp_path / "diagnostics" / "regularity.csv").exists()

    record = read_record(tmp_path, Operation.DIAGNOSE)
    assert record.status == "completed"
    assert "levelset/graph.txt" in record.inputs
    assert "diagnostics/diagnostics.csv" in record.artifacts


def test_compare_against_finite_volume(invoke, tmp_path):
    assert invoke("solve-levelset").exit_code == 0
    result = invoke("fv-run")
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "fv" / "manifest.json").read_text())
    assert [o["time"] for o in manifest["outputs"]] == [0.025, 0.05, 0.075, 0.1]
    assert manifest["mass_drift"] < 1e-12

    result = invoke("compare")
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader((tmp_path / "compare" / "gaps.csv").open()))
    assert [float(r["time"]) for r in rows] == [0.025, 0.05, 0.075, 0.1]
    assert {r["pass"] for r in rows} <= {"true", "false"}
    assert read_record(tmp_path, Operation.COMPARE).status == "completed"


def test_jko_flat(invoke, tmp_path):
    result = invoke("jko-flat")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "jko" / "trajectory.csv").exists()
    reports = list(csv.DictReader((tmp_path / "jko" / "reports.csv").open()))
    assert len(reports) == 2
    record = read_record(tmp_path, Operation.JKO_FLAT)
    assert record.metrics["mass_drift"] < 1e-9


def test_invalid_override_exits_with_config_code(invoke, tmp_path):
    result = invoke("solve-levelset", "--override", "mu=2")
    assert result.exit_code == 2
    assert "mu" in result.output
    assert not (tmp_path / "provenance").exists()


def test_missing_config_file(invoke, tmp_path):
    result = invoke("fv-run", config=tmp_path / "missing.yaml")
    assert result.exit_code == 4


def test_reconstruct_before_solve_is_a_missing_artifact(invoke, tmp_path):
    result = invoke("reconstruct")
    assert result.exit_code == 4
    record = read_record(tmp_path, Operation.RECONSTRUCT)
    assert record.status == "failed"
    assert "eta_checkpoint.txt" in record.error_message


def test_diagnose_needs_three_times(invoke):
    result = invoke("diagnose", "--override", "output_times=[0.05, 0.1]")
    assert result.exit_code == 2


@pytest.mark.slow
def test_cosine_preset_matches_finite_volume(tmp_path):
    runner = CliRunner()
    config = str(CONFIG_DIR / "cos.yaml")
    for command in ("solve-levelset", "reconstruct", "diagnose", "fv-run", "compare"):
        result = runner.invoke(cli, [command, "--config", config, "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
    rows = list(csv.DictReader((tmp_path / "compare" / "gaps.csv").open()))
    assert all(r["pass"] == "true" for r in rows)
    diagnostics = list(csv.DictReader((tmp_path / "diagnostics" / "diagnostics.csv").open()))
    for row in diagnostics:
        assert abs(float(row["mass_error"])) < 1e-8
        assert float(row["hull_violation_max"]) <= 1e-10
