"""Shared fixtures: small grids and flat-interface solutions with closed forms."""

from __future__ import annotations

import numpy as np
import pytest

from macroipm.initial_data import AnalyticGraph, compute_s0
from macroipm.levelset import AnsatzField, EtaTrajectory, SolverGrid, geometric_time_grid
from macroipm.run_config import CONFIG_DIR, LevelSetConfig


@pytest.fixture
def small_levelset() -> LevelSetConfig:
    return LevelSetConfig(n_modes=4, n_phys=16, n2=9, n_times=4, sub_nodes=4, n_quad_s0=64)


@pytest.fixture
def small_grid() -> SolverGrid:
    return SolverGrid(n_modes=4, n_phys=16, n2=9)


@pytest.fixture
def flat_ansatz(small_grid):
    """Factory: the exact flat solution (eta = 0) covering physical times up to `horizon`."""

    def build(horizon: float = 0.3, mu: float = 1.0) -> AnsatzField:
        gamma = AnalyticGraph.flat()
        times = geometric_time_grid(mu * horizon, 4, 0.7)
        eta = EtaTrajectory.zeros(small_grid, times, alpha=0.5, mu=mu)
        return AnsatzField(gamma, compute_s0(gamma, n_modes=small_grid.n_modes), eta)

    return build


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def flat_preset():
    return CONFIG_DIR / "flat.yaml"


# Keeps the end-to-end CLI runs on the flat preset to a few seconds.
FAST_FLAT = (
    "levelset.n_modes=4",
    "levelset.n_phys=16",
    "levelset.n2=9",
    "levelset.n_times=4",
    "levelset.sub_nodes=4",
    "levelset.n_quad_s0=64",
    "eulerian.n_x1=8",
    "eulerian.n_x2=80",
    "fv.n_x1=8",
    "fv.n_x2=64",
    "jko.n_cells=16",
    "jko.half_width=2.0",
    "jko.step=0.05",
    "jko.n_steps=2",
)


@pytest.fixture
def fast_overrides() -> list[str]:
    args: list[str] = []
    for item in FAST_FLAT:
        args += ["--override", item]
    return args
