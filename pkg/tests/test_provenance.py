"""Tests for run records."""

import json

import pytest

from macroipm.errors import MissingArtifactError, SolverDivergenceError
from macroipm.provenance import ArtifactTracker, Operation, file_digest, read_record


def test_completed_record(tmp_path):
    artifact = tmp_path / "fv" / "rho.csv"
    artifact.parent.mkdir()
    artifact.write_text("x1,x2,rho\n")
    with ArtifactTracker(tmp_path, Operation.FV_RUN, "sha256:0011") as tracker:
        tracker.add_artifact(artifact)
        tracker.metrics["steps"] = 12

    record = read_record(tmp_path, Operation.FV_RUN)
    assert record.status == "completed"
    assert record.artifacts == {"fv/rho.csv": file_digest(artifact)}
    assert record.metrics == {"steps": 12}
    assert record.error_message is None
    assert record.config_hash == "sha256:0011"


def test_failed_record_keeps_the_exception(tmp_path):
    with pytest.raises(SolverDivergenceError):
        with ArtifactTracker(tmp_path, Operation.SOLVE_LEVELSET, "sha256:0011"):
            raise SolverDivergenceError("iterate left the unit ball")
    record = read_record(tmp_path, Operation.SOLVE_LEVELSET)
    assert record.status == "failed"
    assert record.error_message == "iterate left the unit ball"


def test_inputs_outside_the_run_keep_their_path(tmp_path):
    outside = tmp_path / "elsewhere.csv"
    outside.write_text("1\n")
    run = tmp_path / "run"
    with ArtifactTracker(run, Operation.COMPARE, "sha256:0011") as tracker:
        tracker.add_input(outside)
    assert read_record(run, Operation.COMPARE).inputs == {outside.as_posix(): file_digest(outside)}


def test_identical_runs_write_identical_records(tmp_path):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        out.mkdir()
        (out / "x.txt").write_text("same\n")
        with ArtifactTracker(out, Operation.DIAGNOSE, "sha256:0011") as tracker:
            tracker.add_artifact(out / "x.txt")
        texts.append(tracker.path.read_text())
    assert texts[0] == texts[1]
    assert json.loads(texts[0])["operation"] == "diagnose"


def test_missing_record(tmp_path):
    with pytest.raises(MissingArtifactError):
        read_record(tmp_path, Operation.JKO_FLAT)
