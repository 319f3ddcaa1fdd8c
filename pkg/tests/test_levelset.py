"""Tests for the solver grid, the ansatz, the operator and the Picard iteration."""

import numpy as np
import pytest

from macroipm.errors import (
    ConeViolationError,
    MonotonicityError,
    SolverDivergenceError,
    StagnationError,
)
from macroipm.initial_data import AnalyticGraph, NormalVelocity, compute_s0
from macroipm.levelset import (
    BaseProfile,
    ConvergenceReport,
    EtaTrajectory,
    LevelSetOperator,
    LevelSetSlice,
    SolverGrid,
    assemble_f,
    eval_F,
    geometric_time_grid,
    graded_mesh,
    read_checkpoint,
    solve_eta,
    time_weighted_average,
    write_checkpoint,
)
from macroipm.levelset.picard import _meets_rule
from macroipm.run_config import LevelSetConfig

# -- grid ---------------------------------------------------------------------


def test_grid_rejects_unresolved_modes():
    with pytest.raises(ValueError):
        SolverGrid(n_modes=8, n_phys=16, n2=9)
    with pytest.raises(ValueError):
        SolverGrid(n_modes=4, n_phys=16, n2=3)


def test_grid_weights_and_nodes(small_grid):
    assert small_grid.y2[0] == -2.0 and small_grid.y2[-1] == 2.0
    assert small_grid.y2_weights.sum() == pytest.approx(4.0)
    assert small_grid.h1 == pytest.approx(2.0 * np.pi / 16)


def test_spectral_derivative_is_exact_on_band_limited_fields(small_grid):
    y1 = small_grid.y1[:, None]
    y2 = small_grid.y2[None, :]
    field = np.cos(3 * y1) * y2**2
    np.testing.assert_allclose(small_grid.d1(field), -3 * np.sin(3 * y1) * y2**2, atol=1e-12)


def test_fourth_order_difference_is_exact_on_quartics(small_grid):
    y2 = small_grid.y2[None, :]
    field = (y2**4 - 2 * y2**3 + y2) * np.ones((small_grid.n_phys, 1))
    expected = np.broadcast_to(4 * y2**3 - 6 * y2**2 + 1, field.shape)
    np.testing.assert_allclose(small_grid.d2(field), expected, atol=1e-11)


def test_projection_drops_high_modes(small_grid):
    y1 = small_grid.y1[:, None]
    low = np.cos(2 * y1) * np.ones((1, small_grid.n2))
    high = np.cos(6 * y1) * np.ones((1, small_grid.n2))
    np.testing.assert_allclose(small_grid.project(low + high), low, atol=1e-14)


def test_interpolation_reproduces_trigonometric_fields(small_grid):
    y1 = small_grid.y1[:, None]
    field = np.sin(2 * y1) * np.ones((1, small_grid.n2))
    x1 = np.array([0.1, 1.7, 4.4])
    expected = np.sin(2 * x1)[:, None] * np.ones((1, small_grid.n2))
    np.testing.assert_allclose(small_grid.interpolate_y1(field, x1), expected, atol=1e-13)


def test_unit_ball_norm(small_grid):
    y2 = small_grid.y2[None, :]
    field = 0.1 * y2 * np.ones((small_grid.n_phys, 1))
    assert small_grid.unit_ball_norm(field) == pytest.approx(0.2 + 0.0 + 0.1)


# -- time grids and weights ---------------------------------------------------


def test_graded_mesh_clusters_near_zero():
    s = graded_mesh(0.5, n_sub=4, grading=2.0)
    np.testing.assert_allclose(s, 0.5 * np.array([0, 1, 4, 9, 16]) / 16)


def test_time_weighted_average_of_a_constant():
    t, alpha, c = 0.04, 0.5, 3.0
    s = graded_mesh(t, 8)
    samples = np.full((len(s), 2, 3), c)
    np.testing.assert_allclose(time_weighted_average(samples, s, t, alpha), c * t**-alpha)


def test_geometric_time_grid():
    times = geometric_time_grid(0.1, 3, 0.5)
    np.testing.assert_allclose(times, [0.0, 0.025, 0.05, 0.1])


# -- ansatz -------------------------------------------------------------------


def test_assemble_f_flat_is_zero(small_grid):
    gamma = AnalyticGraph.flat()
    sl = assemble_f(gamma, NormalVelocity.zero(), small_grid.zeros(), 0.05, 0.5, small_grid)
    np.testing.assert_array_equal(sl.f, 0.0)
    assert sl.check_monotone() == pytest.approx(0.05)


def test_assemble_f_adds_the_weighted_correction(small_grid):
    gamma = AnalyticGraph.cosine(0.1)
    s0 = NormalVelocity.from_samples(0.1 * np.cos(small_grid.y1), 4)
    eta = np.full(small_grid.zeros().shape, 0.2)
    t, alpha = 0.04, 0.5
    sl = assemble_f(gamma, s0, eta, t, alpha, small_grid)
    y1 = small_grid.y1[:, None]
    expected = 0.1 * np.cos(y1) * (1.0 + t) + 0.5 * t ** (1 + alpha) * 0.2
    np.testing.assert_allclose(sl.f, np.broadcast_to(expected, sl.f.shape), atol=1e-14)
    np.testing.assert_allclose(sl.f2, 0.0, atol=1e-12)


def test_assemble_f_rejects_negative_time(small_grid):
    with pytest.raises(ValueError):
        zeros = small_grid.zeros()
        assemble_f(AnalyticGraph.flat(), NormalVelocity.zero(), zeros, -0.1, 0.5, small_grid)


def test_non_monotone_slice_raises(small_grid):
    f2 = np.full(small_grid.zeros().shape, -0.2)
    sl = LevelSetSlice(t=0.1, f=small_grid.zeros(), f1=small_grid.zeros(), f2=f2)
    with pytest.raises(MonotonicityError):
        sl.check_monotone()


def test_ansatz_physical_and_solver_time(flat_ansatz):
    field = flat_ansatz(horizon=0.2, mu=0.9)
    assert field.solver_time(0.1) == pytest.approx(0.09)
    assert field.horizon == pytest.approx(0.2)
    columns = field.columns(0.1, [0.0, 1.0])
    np.testing.assert_allclose(columns, 0.09 * np.tile(field.grid.y2, (2, 1)), atol=1e-15)


# -- operator -----------------------------------------------------------------


def test_operator_vanishes_on_the_flat_profile(small_grid):
    gamma = AnalyticGraph.flat()
    values = eval_F(small_grid.zeros(), gamma, NormalVelocity.zero(), 0.05, 0.5, small_grid)
    np.testing.assert_array_equal(values, 0.0)


def test_operator_is_zero_at_time_zero(small_grid):
    gamma = AnalyticGraph.cosine(0.1)
    s0 = compute_s0(gamma, n_quad=64, n_modes=4, check=False)
    base = BaseProfile.sample(gamma, s0, small_grid)
    result = LevelSetOperator(base).evaluate(base.assemble(small_grid.zeros(), 0.0))
    np.testing.assert_array_equal(result.values, 0.0)


def test_operator_grows_away_from_time_zero(small_grid):
    gamma = AnalyticGraph.cosine(0.05)
    s0 = compute_s0(gamma, n_quad=64, n_modes=4, check=False)
    base = BaseProfile.sample(gamma, s0, small_grid)
    operator = LevelSetOperator(base, statistics=True)
    early = operator.evaluate(base.assemble(small_grid.zeros(), 1e-3))
    late = operator.evaluate(base.assemble(small_grid.zeros(), 1e-2))
    assert np.all(np.isfinite(early.values))
    assert np.max(np.abs(early.values)) < np.max(np.abs(late.values))
    assert late.min_slope > 0.0
    assert late.nondegeneracy > 0.0


def test_threaded_operator_matches_serial(small_grid):
    gamma = AnalyticGraph.cosine(0.05)
    s0 = compute_s0(gamma, n_quad=64, n_modes=4, check=False)
    base = BaseProfile.sample(gamma, s0, small_grid)
    sl = base.assemble(small_grid.zeros(), 5e-3)
    serial = LevelSetOperator(base).evaluate(sl).values
    threaded = LevelSetOperator(base, workers=3).evaluate(sl).values
    np.testing.assert_allclose(threaded, serial, rtol=1e-14, atol=1e-16)


def test_operator_rejects_a_folded_column(small_grid):
    gamma = AnalyticGraph.cosine(0.05)
    s0 = compute_s0(gamma, n_quad=64, n_modes=4, check=False)
    base = BaseProfile.sample(gamma, s0, small_grid)
    t = 0.01
    # t y2 + f decreases in y2 while the stored slope still reads as monotone
    f = np.tile(-2.0 * t * small_grid.y2, (small_grid.n_phys, 1))
    sl = LevelSetSlice(t=t, f=f, f1=small_grid.zeros(), f2=small_grid.zeros())
    assert sl.check_monotone() > 0.0
    with pytest.raises(ConeViolationError):
        LevelSetOperator(base).evaluate(sl)


# -- Picard -------------------------------------------------------------------


def test_convergence_rule():
    assert _meets_rule([1e-2, 1e-5, 1e-8, 1e-11], 1e-10)
    assert not _meets_rule([1e-2, 1e-5, 1e-8], 1e-10)
    assert not _meets_rule([1e-12, 1e-11, 2e-11], 1e-10)
    assert _meets_rule([0.0], 1e-10)
    assert _meets_rule([1e-3, 0.0], 1e-10)
    # below tol without three iterates of ratio history
    assert not _meets_rule([1e-12], 1e-10)
    assert not _meets_rule([1e-3, 1e-12], 1e-10)


def test_flat_interface_converges_in_one_sweep(small_levelset):
    trajectory, report = solve_eta(AnalyticGraph.flat(), 0.1, config=small_levelset)
    assert report.converged
    assert report.iterations == 1
    assert report.lambdas == [0.0]
    np.testing.assert_array_equal(trajectory.values, 0.0)
    assert trajectory.horizon == pytest.approx(0.1)


def test_small_cosine_converges(small_levelset):
    gamma = AnalyticGraph.cosine(0.02)
    trajectory, report = solve_eta(gamma, 0.005, config=small_levelset)
    assert report.converged
    assert report.lambdas[-1] <= small_levelset.tol
    assert report.iterations >= 3
    assert report.final_residual <= 2 * small_levelset.tol
    assert all(r <= 0.9 for r in report.ratios[-2:])
    assert trajectory.converged
    assert np.all(np.isfinite(trajectory.values))


def test_weighted_solution_does_not_depend_on_alpha(small_levelset):
    gamma = AnalyticGraph.cosine(0.02)
    low, _ = solve_eta(gamma, 0.005, alpha=0.3, config=small_levelset)
    high, _ = solve_eta(gamma, 0.005, alpha=0.6, config=small_levelset)
    np.testing.assert_array_equal(low.times, high.times)
    assert np.max(np.abs(low.weighted())) > 0.0
    assert np.max(np.abs(low.weighted() - high.weighted())) <= 1e-10


def test_mobility_rescales_the_solver_horizon(small_levelset):
    trajectory, _ = solve_eta(AnalyticGraph.flat(), 0.1, mu=0.5, config=small_levelset)
    assert trajectory.horizon == pytest.approx(0.05)
    assert trajectory.mu == 0.5


def test_alpha_out_of_range(small_levelset):
    with pytest.raises(ValueError):
        solve_eta(AnalyticGraph.flat(), 0.1, alpha=1.0, config=small_levelset)


def test_stagnation_carries_the_report():
    config = LevelSetConfig(
        n_modes=4, n_phys=16, n2=9, n_times=4, sub_nodes=4, n_quad_s0=64, max_iters=1, tol=1e-30
    )
    with pytest.raises(StagnationError) as info:
        solve_eta(AnalyticGraph.cosine(0.02), 0.005, config=config)
    assert isinstance(info.value, SolverDivergenceError)
    assert info.value.report.iterations == 1
    assert info.value.exit_code == 3


def test_convergence_report_text_round_trip():
    report = ConvergenceReport(
        lambdas=[1e-3, 2e-6], iterations=2, final_residual=1e-9, converged=True, tol=1e-8,
        message="converged in 2 iterations",
    )
    loaded = ConvergenceReport.from_text(report.to_text())
    assert loaded.lambdas == report.lambdas
    assert loaded.converged
    assert loaded.message == report.message
    assert loaded.ratios == pytest.approx([2e-3])


# -- trajectory ---------------------------------------------------------------


def test_trajectory_rejects_bad_time_grid(small_grid):
    with pytest.raises(ValueError):
        EtaTrajectory.zeros(small_grid, np.array([0.01, 0.02]), 0.5)
    with pytest.raises(ValueError):
        EtaTrajectory.zeros(small_grid, np.array([0.0, 0.02, 0.02]), 0.5)


def test_weighted_interpolation_is_linear(small_grid):
    times = np.array([0.0, 0.1, 0.2])
    g = np.stack([small_grid.zeros(), np.full(small_grid.zeros().shape, 1.0),
                  np.full(small_grid.zeros().shape, 3.0)])
    traj = EtaTrajectory.from_weighted(small_grid, times, g, alpha=0.5)
    np.testing.assert_allclose(traj.weighted_at(0.15), 2.0)
    np.testing.assert_allclose(traj.eta_at(0.1), 0.1**-1.5)
    np.testing.assert_array_equal(traj.eta_at(0.0), 0.0)
    with pytest.raises(ValueError):
        traj.weighted_at(0.3)


def test_checkpoint_round_trip(tmp_path, small_grid):
    times = np.array([0.0, 0.01, 0.03])
    y1 = small_grid.y1[:, None]
    eta = np.stack([small_grid.zeros()] + [np.cos(y1) * small_grid.y2[None, :] * k for k in (1, 2)])
    traj = EtaTrajectory(small_grid, 0.5, times, eta, mu=0.9, converged=True)
    path = write_checkpoint(traj, tmp_path / "eta.txt", config_hash="sha256:abc")
    loaded, header = read_checkpoint(path)
    assert header["config_hash"] == "sha256:abc"
    assert loaded.mu == 0.9 and loaded.alpha == 0.5 and loaded.converged
    np.testing.assert_array_equal(loaded.times, times)
    np.testing.assert_allclose(loaded.values, eta, atol=1e-14)
