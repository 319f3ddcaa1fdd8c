"""
Run records for reproducible artifacts.

Every subcommand runs inside an ArtifactTracker. The tracker collects the
files the command writes, their sha256 digests and a few scalar metrics,
and on exit writes provenance/<operation>.json next to them.

Records carry no timestamps or random ids: two runs with the same config
produce byte-identical records.

Usage:
    with ArtifactTracker(out_dir, Operation.FV_RUN, config_hash) as tracker:
        path = write_field_csv(field, out_dir / "fv" / "rho_t0.1.csv")
        tracker.add_artifact(path)
        tracker.metrics["steps"] = run.steps
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .errors import MissingArtifactError

logger = logging.getLogger(__name__)

__all__ = ["Operation", "RunRecord", "ArtifactTracker", "file_digest", "read_record"]


class Operation(str, Enum):
    """One value per CLI subcommand."""

    SOLVE_LEVELSET = "solve-levelset"
    RECONSTRUCT = "reconstruct"
    FV_RUN = "fv-run"
    JKO_FLAT = "jko-flat"
    DIAGNOSE = "diagnose"
    COMPARE = "compare"


def file_digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunRecord:
    """What one subcommand produced and from which configuration."""

    operation: Operation
    config_hash: str
    status: str = "running"
    artifacts: dict[str, str] = field(default_factory=dict)  # relative path -> digest
    inputs: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)
    error_message: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "operation": self.operation.value,
            "config_hash": self.config_hash,
            "status": self.status,
            "artifacts": dict(sorted(self.artifacts.items())),
            "inputs": dict(sorted(self.inputs.items())),
            "metrics": self.metrics,
            "error_message": self.error_message,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunRecord:
        return cls(
            operation=Operation(data["operation"]),
            config_hash=data["config_hash"],
            status=data["status"],
            artifacts=dict(data.get("artifacts", {})),
            inputs=dict(data.get("inputs", {})),
            metrics=dict(data.get("metrics", {})),
            error_message=data.get("error_message"),
        )


class ArtifactTracker:
    """
    Collects the artifacts of one subcommand.

    Use as a context manager; the record is written on exit with status
    'completed' or 'failed'. Exceptions are not swallowed.
    """

    def __init__(self, out_dir: Path, operation: Operation, config_hash: str) -> None:
        self.out_dir = Path(out_dir)
        self.record = RunRecord(operation=operation, config_hash=config_hash)

    @property
    def metrics(self) -> dict[str, Any]:
        return self.record.metrics

    @property
    def path(self) -> Path:
        return self.out_dir / "provenance" / f"{self.record.operation.value}.json"

    def __enter__(self) -> ArtifactTracker:
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if exc_type:
            self.record.status = "failed"
            self.record.error_message = str(exc_val)
        else:
            self.record.status = "completed"
        self.write()

    def _relative(self, path: Path) -> str:
        path = Path(path)
        try:
            return path.relative_to(self.out_dir).as_posix()
        except ValueError:
            return path.as_posix()

    def add_artifact(self, path: Path) -> Path:
        """Register a written file and its digest."""
        self.record.artifacts[self._relative(path)] = file_digest(path)
        return Path(path)

    def add_input(self, path: Path) -> None:
        """Register an artifact of an earlier subcommand that this one read."""
        self.record.inputs[self._relative(path)] = file_digest(path)

    def write(self) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.record.to_dict(), indent=2, sort_keys=True) + "\n")
        logger.debug("provenance written to %s (%s)", self.path, self.record.status)
        return self.path


def read_record(out_dir: Path, operation: Operation) -> RunRecord:
    path = Path(out_dir) / "provenance" / f"{operation.value}.json"
    if not path.exists():
        raise MissingArtifactError(f"no run record for {operation.value} in {out_dir}")
    return RunRecord.from_dict(json.loads(path.read_text()))
