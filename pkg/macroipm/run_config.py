"""
Run configuration loader for macro-ipm.

Loads and validates YAML run configurations (config/runs/*.yaml) using
Pydantic models. Dotted overrides (`levelset.n_phys=128`) are applied to the
raw mapping before validation, so they go through the same checks.

Usage:
    from macroipm.run_config import load_config, config_hash

    config = load_config("config/runs/cosine.yaml", overrides=["alpha=0.3"])
    gamma = config.build_graph()
    print(config_hash(config))
"""

from __future__ import annotations

import hashlib
import json
import re
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigParseError, ConfigValidationError, InvalidGraphError, MissingArtifactError
from .initial_data import AnalyticGraph

__all__ = [
    "RunConfig",
    "LevelSetConfig",
    "EulerianConfig",
    "FVConfig",
    "JKOConfig",
    "Tolerances",
    "load_config",
    "parse_config",
    "apply_overrides",
    "config_hash",
    "list_presets",
    "CONFIG_DIR",
]

# Default preset directory relative to repo root
CONFIG_DIR = Path(__file__).parent.parent / "config" / "runs"

COSINE_PRESET = re.compile(r"^cos\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)$")


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LevelSetConfig(_Section):
    """Solver grid, time grid and Picard settings."""

    n_modes: int = 64
    n_phys: int = 256
    n2: int = 33
    n_times: int = 12
    ratio: float = Field(default=0.7, gt=0.0, lt=1.0)
    sub_nodes: int = Field(default=32, ge=2)
    grading: float = Field(default=2.0, ge=1.0)
    tol: float = Field(default=1e-10, gt=0.0)
    max_iters: int = Field(default=50, ge=1)
    n_quad_s0: int = Field(default=256, ge=16)

    @field_validator("n_phys")
    @classmethod
    def check_n_phys(cls, v: int) -> int:
        if not _is_power_of_two(v):
            raise ValueError(f"n_phys must be a power of two, got {v}")
        return v

    @field_validator("n2")
    @classmethod
    def check_n2(cls, v: int) -> int:
        if v < 5 or v % 2 == 0:
            raise ValueError(f"n2 must be odd and >= 5, got {v}")
        return v

    @model_validator(mode="after")
    def check_modes(self) -> LevelSetConfig:
        if not 1 <= self.n_modes < self.n_phys // 2:
            raise ValueError(f"n_modes must lie in [1, n_phys/2), got {self.n_modes}")
        return self


class EulerianConfig(_Section):
    """Grid on which the level-set solution is sampled (nodes in x2)."""

    n_x1: int = 256
    n_x2: int = 256
    half_height: float | None = Field(default=None, gt=0.0)

    @field_validator("n_x1")
    @classmethod
    def check_n_x1(cls, v: int) -> int:
        if not _is_power_of_two(v):
            raise ValueError(f"n_x1 must be a power of two, got {v}")
        return v

    @field_validator("n_x2")
    @classmethod
    def check_n_x2(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise ValueError(f"n_x2 must be even and >= 4, got {v}")
        return v


class FVConfig(_Section):
    """Finite-volume grid and CFL number."""

    n_x1: int = 256
    n_x2: int = 256
    cfl: float = Field(default=0.4, gt=0.0, le=1.0)
    half_height: float | None = Field(default=None, gt=0.0)

    @field_validator("n_x1")
    @classmethod
    def check_n_x1(cls, v: int) -> int:
        if not _is_power_of_two(v):
            raise ValueError(f"n_x1 must be a power of two, got {v}")
        return v

    @field_validator("n_x2")
    @classmethod
    def check_n_x2(cls, v: int) -> int:
        if v < 16 or v % 2:
            raise ValueError(f"n_x2 must be even and >= 16, got {v}")
        return v


class JKOConfig(_Section):
    """Flat one-dimensional minimizing-movement scheme."""

    n_cells: int = Field(default=128, ge=4)
    half_width: float = Field(default=3.0, gt=0.0)
    step: float = Field(default=0.01, ge=0.0)
    n_steps: int = Field(default=50, ge=1)
    max_inner: int = Field(default=10_000, ge=1)
    # transport cells per stored cell; None picks the smallest with spacing <= step
    refine: int | None = Field(default=None, ge=1)

    @field_validator("n_cells")
    @classmethod
    def check_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"n_cells must be even so that y = 0 is a cell face, got {v}")
        return v


class Tolerances(_Section):
    """Acceptance thresholds used by `compare`."""

    compare_l1: float = Field(default=0.05, gt=0.0)
    compare_linf: float = Field(default=1.0, gt=0.0)


class InterfaceSpec(_Section):
    """Explicit coefficient list: [k, re, im] per mode."""

    coefficients: list[tuple[int, float, float]]


class RunConfig(BaseModel):
    """Validated run configuration; every section has defaults."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "run"
    interface: str | InterfaceSpec = "flat"
    alpha: float = 0.5
    mu: float = 1.0
    horizon: float = 0.05
    output_times: list[float] = Field(default_factory=list)
    output_dir: str | None = None
    levelset: LevelSetConfig = Field(default_factory=LevelSetConfig)
    eulerian: EulerianConfig = Field(default_factory=EulerianConfig)
    fv: FVConfig = Field(default_factory=FVConfig)
    jko: JKOConfig = Field(default_factory=JKOConfig)
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("alpha out of (0,1)")
        return v

    @field_validator("mu")
    @classmethod
    def check_mu(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("mu out of (0,1]")
        return v

    @field_validator("horizon")
    @classmethod
    def check_horizon(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("horizon must be positive")
        return v

    @field_validator("interface")
    @classmethod
    def check_interface(cls, v: str | InterfaceSpec) -> str | InterfaceSpec:
        # Building the graph runs every AnalyticGraph invariant.
        _build_graph(v)
        return v

    @model_validator(mode="after")
    def fill_output_times(self) -> RunConfig:
        times = self.output_times or [self.horizon]
        bad = [t for t in times if not 0.0 < t <= self.horizon * (1.0 + 1e-12)]
        if bad:
            raise ValueError(f"output_times {bad} outside (0, horizon={self.horizon}]")
        object.__setattr__(self, "output_times", sorted(times))
        return self

    def build_graph(self) -> AnalyticGraph:
        return _build_graph(self.interface)

    def half_height(self) -> float:
        """Eulerian strip half-height L = max(4, 2 max|gamma0| + 2T + 1) unless set."""
        if self.eulerian.half_height is not None:
            return self.eulerian.half_height
        return max(4.0, 2.0 * self.build_graph().max_abs() + 2.0 * self.horizon + 1.0)

    def fv_half_height(self) -> float:
        return self.fv.half_height if self.fv.half_height is not None else self.half_height()

    def resolve_output_dir(self, root: Path | str = "runs") -> Path:
        return Path(self.output_dir) if self.output_dir else Path(root) / self.name


def _build_graph(spec: str | InterfaceSpec) -> AnalyticGraph:
    try:
        if isinstance(spec, InterfaceSpec):
            modes: dict[int, complex] = {}
            for k, re_part, im_part in spec.coefficients:
                if k in modes:
                    raise ValueError(f"mode {k} listed twice")
                modes[k] = complex(re_part, im_part)
            return AnalyticGraph.from_modes(modes)
        text = spec.strip()
        if text == "flat":
            return AnalyticGraph.flat()
        match = COSINE_PRESET.match(text)
        if match:
            return AnalyticGraph.cosine(float(match.group(1)), int(match.group(2)))
    except InvalidGraphError as e:
        raise ValueError(str(e)) from e
    raise ValueError(
        f"unknown interface preset {spec!r}; use 'flat' or 'cos(amplitude, wavenumber)'"
    )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def apply_overrides(raw: dict[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    """Apply dotted key=value overrides; values are parsed as YAML scalars/lists."""
    data = json.loads(json.dumps(raw))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigValidationError(item, "override must look like key=value")
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigValidationError(key, "cannot override inside a non-mapping value")
        node[parts[-1]] = yaml.safe_load(value)
    return data


def parse_config(raw: dict[str, Any], overrides: Iterable[str] = ()) -> RunConfig:
    """Validate a raw mapping into RunConfig, naming the offending field on failure."""
    data = apply_overrides(raw or {}, overrides)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or "config"
        message = first["msg"].removeprefix("Value error, ")
        raise ConfigValidationError(field, message) from e


def load_config(path: Path | str, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        path: YAML file
        overrides: dotted key=value strings applied before validation

    Returns:
        RunConfig with defaults filled

    Raises:
        MissingArtifactError: if the file does not exist
        ConfigParseError: on YAML syntax errors ('<path>:<line>: <problem>')
        ConfigValidationError: if a field is invalid
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 0
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigParseError(f"{path}:{line}: {problem}") from e
    if raw is not None and not isinstance(raw, dict):
        raise ConfigParseError(f"{path}:1: top level must be a mapping")
    return parse_config(raw or {}, overrides)


def config_hash(config: RunConfig) -> str:
    """SHA256 of the canonical JSON dump, for artifact provenance."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return f"sha256:{hashlib.sha256(canonical.encode()).hexdigest()[:16]}"


def list_presets(config_dir: Path | None = None) -> list[str]:
    """Preset names available in config/runs/."""
    config_dir = config_dir or CONFIG_DIR
    if not config_dir.exists():
        return []
    return sorted(p.stem for p in config_dir.glob("*.yaml"))
