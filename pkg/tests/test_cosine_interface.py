"""Resolution runs on the cosine interface gamma0 = 0.1 cos: convergence, weights and fields."""

import numpy as np
import pytest

from macroipm.diagnostics import Entropy, entropy_residual, expansion_check, lipschitz_constant
from macroipm.initial_data import AnalyticGraph, compute_s0
from macroipm.levelset import AnsatzField, solve_eta
from macroipm.reconstruction import EulerianGrid, density_field, level_curves, velocity_field
from macroipm.run_config import LevelSetConfig

pytestmark = pytest.mark.slow

AMPLITUDE = 0.1


@pytest.fixture(scope="module")
def gamma() -> AnalyticGraph:
    return AnalyticGraph.cosine(AMPLITUDE)


@pytest.fixture(scope="module")
def medium_levelset() -> LevelSetConfig:
    return LevelSetConfig(n_modes=8, n_phys=32, n2=17, n_times=8, sub_nodes=16, n_quad_s0=128)


@pytest.fixture(scope="module")
def long_run(gamma, medium_levelset):
    """alpha = 0.5 to T = 0.1 with time nodes down to about 1e-3."""
    config = medium_levelset.model_copy(update={"n_times": 14, "ratio": 0.7})
    s0 = compute_s0(gamma, n_quad=config.n_quad_s0, n_modes=config.n_modes)
    eta, report = solve_eta(gamma, 0.1, alpha=0.5, config=config, s0=s0)
    return AnsatzField(gamma, s0, eta), report


def test_picard_converges_at_moderate_amplitude(gamma, medium_levelset):
    _, report = solve_eta(gamma, 0.05, alpha=0.5, config=medium_levelset)
    assert report.converged
    assert report.final_residual <= 2 * medium_levelset.tol
    assert all(r <= 0.9 for r in report.ratios[-2:])


def test_weighted_solution_does_not_depend_on_alpha(gamma, medium_levelset):
    low, _ = solve_eta(gamma, 0.05, alpha=0.3, config=medium_levelset)
    high, _ = solve_eta(gamma, 0.05, alpha=0.6, config=medium_levelset)
    np.testing.assert_array_equal(low.times, high.times)
    assert np.max(np.abs(low.weighted() - high.weighted())) <= 1e-5


def test_level_curves_follow_the_linear_expansion(gamma, long_run):
    field, report = long_run
    assert report.converged
    levels = np.linspace(-1.0, 1.0, 9)
    times = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    curves = [level_curves(field, t, levels) for t in times]
    fit = expansion_check(curves, gamma, field.s0)
    assert not fit.exact_zero
    assert fit.slope >= 1.4


def _entropy_residuals(field: AnsatzField, grid: EulerianGrid, dt: float) -> dict[str, float]:
    times = [0.05 - dt, 0.05, 0.05 + dt]
    densities = [density_field(field, t, grid) for t in times]
    velocities = [velocity_field(field, t, grid) for t in times]
    entropies = {
        "identity": Entropy.identity(),
        "square": Entropy.square(),
        "kruzhkov": Entropy.kruzhkov(0.3),
    }
    return {
        name: float(entropy_residual(densities, velocities, e)[1])
        for name, e in entropies.items()
    }


def test_entropy_balance_improves_under_refinement(long_run):
    field, _ = long_run
    coarse = _entropy_residuals(field, EulerianGrid(16, 64, 1.0), 0.01)
    fine = _entropy_residuals(field, EulerianGrid(64, 256, 1.0), 0.0025)
    for name in coarse:
        assert fine[name] < coarse[name], name
        order = np.log(coarse[name] / fine[name]) / np.log(4.0)
        assert order >= 0.9, (name, order)


@pytest.mark.parametrize("t", [0.01, 0.03, 0.1])
def test_lipschitz_constant_is_refinement_stable(long_run, t):
    field, _ = long_run
    coarse = lipschitz_constant(density_field(field, t, EulerianGrid(32, 200, 1.0)))
    fine = lipschitz_constant(density_field(field, t, EulerianGrid(64, 400, 1.0)))
    assert 0.3 < coarse < 1.0
    assert 0.3 < fine < 1.0
    assert abs(fine - coarse) <= 0.1 * fine
