"""
Weighted Picard iteration for eta.

    eta(t) = t^-(1+alpha) int_0^t F_s(eta(s)) ds,    eta(0) = 0

Each sweep rebuilds every time node from the previous iterate (Jacobi
ordering). The s-integral at node t_i uses the graded mesh
s_j = t_i (j / M_s)^p, and the previous iterate is read between nodes
through linear interpolation of g = t^(1+alpha) eta. Interpolating g keeps the
discrete map independent of alpha up to the weight.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from ..errors import SolverDivergenceError, StagnationError
from ..initial_data import AnalyticGraph, NormalVelocity, compute_s0
from ..run_config import LevelSetConfig
from .ansatz import BaseProfile
from .grid import SolverGrid
from .operator import LevelSetOperator
from .trajectory import EtaTrajectory

logger = logging.getLogger(__name__)

__all__ = [
    "ConvergenceReport",
    "graded_mesh",
    "time_weighted_average",
    "geometric_time_grid",
    "solve_eta",
]

CONTRACTION_RATIO = 0.9


def graded_mesh(t: float, n_sub: int = 32, grading: float = 2.0) -> np.ndarray:
    """s_j = t (j / n_sub)^grading, j = 0..n_sub."""
    return t * (np.arange(n_sub + 1) / n_sub) ** grading


def time_weighted_average(
    samples: np.ndarray, s_nodes: np.ndarray, t: float, alpha: float
) -> np.ndarray:
    """Composite trapezoid of samples over s_nodes divided by t^(1+alpha)."""
    return trapezoid(samples, s_nodes, axis=0) / t ** (1.0 + alpha)


def geometric_time_grid(horizon: float, n_times: int, ratio: float) -> np.ndarray:
    """0 followed by horizon * ratio^(n_times - i), i = 1..n_times."""
    i = np.arange(1, n_times + 1)
    return np.concatenate([[0.0], horizon * ratio ** (n_times - i)])


@dataclass
class ConvergenceReport:
    """Measured Picard history; lambdas are successive sup-norm differences of eta."""

    lambdas: list[float] = field(default_factory=list)
    iterations: int = 0
    final_residual: float = float("nan")
    converged: bool = False
    tol: float = 0.0
    max_integrand: float = 0.0
    nondegeneracy: float = 0.0
    message: str = ""

    @property
    def ratios(self) -> list[float]:
        lam = self.lambdas
        return [lam[k] / lam[k - 1] for k in range(1, len(lam)) if lam[k - 1] > 0.0]

    def to_text(self) -> str:
        lines = [
            f"converged: {str(self.converged).lower()}",
            f"iterations: {self.iterations}",
            f"tol: {self.tol!r}",
            f"final_residual: {self.final_residual!r}",
            f"max_integrand: {self.max_integrand!r}",
            f"nondegeneracy: {self.nondegeneracy!r}",
            "lambdas: " + " ".join(repr(float(x)) for x in self.lambdas),
            f"message: {self.message}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ConvergenceReport:
        data = {}
        for line in text.splitlines():
            key, _, value = line.partition(":")
            data[key.strip()] = value.strip()
        return cls(
            lambdas=[float(x) for x in data.get("lambdas", "").split()],
            iterations=int(data["iterations"]),
            final_residual=float(data["final_residual"]),
            converged=data["converged"] == "true",
            tol=float(data["tol"]),
            max_integrand=float(data["max_integrand"]),
            nondegeneracy=float(data["nondegeneracy"]),
            message=data.get("message", ""),
        )


def _meets_rule(lambdas: list[float], tol: float) -> bool:
    """lambda_last <= tol and the last two ratios (three iterates) are <= 0.9.

    An exact zero (the flat interface) needs no ratio history.
    """
    last = lambdas[-1]
    if last > tol:
        return False
    if last == 0.0:
        return True
    if len(lambdas) < 3:
        return False
    tail = lambdas[-3:]
    return all(b <= CONTRACTION_RATIO * a for a, b in zip(tail, tail[1:]))


class _PicardMap:
    """g -> int_0^{t_i} F(s, g(s)) ds at every node, projected to n_modes."""

    def __init__(self, operator: LevelSetOperator, times: np.ndarray, config: LevelSetConfig):
        self.operator = operator
        self.grid = operator.grid
        self.times = times
        self.config = config
        self.max_integrand = 0.0
        self.nondegeneracy = 0.0

    def _interpolate(self, g: np.ndarray, s: float) -> np.ndarray:
        i = int(np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, len(self.times) - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        w = (s - t0) / (t1 - t0)
        return (1.0 - w) * g[i] + w * g[i + 1]

    def __call__(self, g: np.ndarray) -> np.ndarray:
        self.max_integrand = 0.0
        self.nondegeneracy = 0.0
        out = np.zeros_like(g)
        base = self.operator.base
        for i, t in enumerate(self.times[1:], start=1):
            s_nodes = graded_mesh(t, self.config.sub_nodes, self.config.grading)
            samples = np.zeros((len(s_nodes),) + g.shape[1:])
            for j, s in enumerate(s_nodes[1:], start=1):
                result = self.operator.evaluate(base.assemble(self._interpolate(g, s), s))
                samples[j] = result.values
                self.max_integrand = max(self.max_integrand, result.max_integrand)
                self.nondegeneracy = max(self.nondegeneracy, result.nondegeneracy)
            out[i] = self.grid.project(trapezoid(samples, s_nodes, axis=0))
        return out


def solve_eta(
    gamma: AnalyticGraph,
    horizon: float,
    alpha: float = 0.5,
    mu: float = 1.0,
    config: LevelSetConfig | None = None,
    s0: NormalVelocity | None = None,
    workers: int = 1,
) -> tuple[EtaTrajectory, ConvergenceReport]:
    """
    Solve the fixed-point equation for eta on [0, mu * horizon] in solver time.

    Args:
        gamma: initial interface
        horizon: physical time T
        alpha: weight exponent in (0, 1)
        mu: mobility in (0, 1]
        config: grid, time-grid and iteration settings
        s0: precomputed normal velocity (computed from gamma if omitted)
        workers: threads for the operator

    Returns:
        (EtaTrajectory, ConvergenceReport)

    Raises:
        SolverDivergenceError: if an iterate leaves the unit ball; the report is attached.
        StagnationError: if max_iters is reached without meeting the convergence rule.
    """
    config = config or LevelSetConfig()
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha out of (0,1): {alpha}")
    if s0 is None:
        s0 = compute_s0(gamma, n_quad=config.n_quad_s0, n_modes=config.n_modes)

    grid = SolverGrid(n_modes=config.n_modes, n_phys=config.n_phys, n2=config.n2)
    times = geometric_time_grid(mu * horizon, config.n_times, config.ratio)
    weight = np.ones_like(times)
    weight[1:] = times[1:] ** -(1.0 + alpha)
    weight = weight[:, None, None]

    base = BaseProfile.sample(gamma, s0, grid, mu)
    picard = _PicardMap(LevelSetOperator(base, mu=mu, workers=workers), times, config)
    report = ConvergenceReport(tol=config.tol)

    g = np.zeros((len(times), grid.n_phys, grid.n2))
    for k in range(1, config.max_iters + 1):
        g_new = picard(g)
        lam = float(np.max(np.abs((g_new - g) * weight)))
        report.lambdas.append(lam)
        report.iterations = k
        report.max_integrand = picard.max_integrand
        report.nondegeneracy = picard.nondegeneracy
        logger.info("picard iteration %d: lambda=%.3e", k, lam)

        for i in range(1, len(times)):
            size = grid.unit_ball_norm(g_new[i] * weight[i])
            if size >= 1.0:
                report.message = (
                    f"iterate {k} left the unit ball at t={times[i]:.4g} (norm {size:.3f}); "
                    f"horizon {horizon} too large"
                )
                raise SolverDivergenceError(report.message, report)
        g = g_new
        if _meets_rule(report.lambdas, config.tol):
            break
    else:
        report.message = f"no convergence after {config.max_iters} iterations"
        raise StagnationError(report.message, report)

    report.final_residual = float(np.max(np.abs((picard(g) - g) * weight)))
    report.converged = True
    report.message = f"converged in {report.iterations} iterations"
    logger.info("%s, residual %.3e", report.message, report.final_residual)
    trajectory = EtaTrajectory.from_weighted(grid, times, g, alpha, mu, converged=True)
    return trajectory, report
