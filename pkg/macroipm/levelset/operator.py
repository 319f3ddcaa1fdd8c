"""
The nonlinear operator of the closed level-set equation.

    F_t(f)(y) = -int_{Omega0} [ K2(dX_t) d(d_y1 f_t) - K2(dX_0) d(gamma0') ] dz

with dX_t(y, z) = (y1 - z1, t (y2 - z2) + f(t, y) - f(t, z)) and
d(h)(y, z) = h(y) - h(z). Both terms share one tensor rule (periodic trapezoid
in z1, trapezoid in z2) so that F_t -> 0 as t -> 0 holds at the discrete
level. The column z1 = y1 carries K2 = 0 away from z2 = y2 and the single
singular node z = y is assigned 0.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConeViolationError
from ..initial_data import AnalyticGraph, NormalVelocity
from ..kernel import FOUR_PI, canonical_angle, strip_denominator
from .ansatz import BaseProfile, LevelSetSlice
from .grid import SolverGrid

logger = logging.getLogger(__name__)

__all__ = ["OperatorEvaluation", "LevelSetOperator", "eval_F"]


@dataclass(frozen=True, eq=False)
class OperatorEvaluation:
    """F_t on the solver grid plus the quadrature statistics of that evaluation."""

    values: np.ndarray
    max_integrand: float = 0.0
    nondegeneracy: float = 0.0  # max t|y2 - z2| / |dX|_* over regular nodes
    min_slope: float = 0.0


class LevelSetOperator:
    """
    Evaluates F_t for a fixed initial interface on a fixed grid.

    Everything that does not depend on t or eta (index shifts, z1 weights and
    the t = 0 reference term) is built once in the constructor.
    """

    def __init__(
        self,
        base: BaseProfile,
        mu: float = 1.0,
        workers: int = 1,
        statistics: bool = True,
    ) -> None:
        self.base = base
        self.grid = base.grid
        self.mu = mu
        self.workers = max(1, workers)
        self.statistics = statistics

        n = self.grid.n_phys
        self._shift = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        z1 = self.grid.y1
        self._sin_z1 = np.sin(z1)
        self._sin2_half = 2.0 * np.sin(0.5 * z1) ** 2
        self._z1_sq = canonical_angle(z1) ** 2
        self._reference = self._reference_term()

    def _reference_term(self) -> np.ndarray:
        """Sum over z1 of K2(dX_0) d(gamma0'), column z1 = 0 excluded."""
        g, g1 = self.base.gamma, self.base.gamma1
        dz2 = g[:, None] - g[self._shift]
        d = strip_denominator(self.grid.y1[None, :], dz2)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = self._sin_z1[None, :] * (g1[:, None] - g1[self._shift]) / (FOUR_PI * d)
        integrand[:, 0] = 0.0
        return integrand.sum(axis=1)

    def evaluate(self, sl: LevelSetSlice) -> OperatorEvaluation:
        """F at the slice's time; t = 0 returns the zero field.

        Raises:
            MonotonicityError: if t + d_y2 f <= 0 somewhere.
            ConeViolationError: if the separation on the column z1 = y1 fails to
                keep the sign of y2 - z2.
        """
        grid = self.grid
        if sl.t == 0.0:
            return OperatorEvaluation(values=grid.zeros())
        min_slope = sl.check_monotone()

        if self.base.is_flat and not np.any(sl.f1):
            return OperatorEvaluation(values=grid.zeros(), nondegeneracy=1.0, min_slope=min_slope)

        f_shift = sl.f[self._shift]
        f1_shift = sl.f1[self._shift]

        def row(a: int) -> tuple[np.ndarray, float, float]:
            return self._row(sl, a, f_shift, f1_shift)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(row, range(grid.n2)))
        else:
            rows = [row(a) for a in range(grid.n2)]

        values = np.stack([r[0] for r in rows], axis=1)
        weight_sum = float(np.sum(grid.y2_weights))
        values = (values + grid.h1 * weight_sum * self._reference[:, None]) / self.mu
        return OperatorEvaluation(
            values=values,
            max_integrand=max(r[1] for r in rows) / self.mu,
            nondegeneracy=max(r[2] for r in rows),
            min_slope=min_slope,
        )

    def _row(
        self, sl: LevelSetSlice, a: int, f_shift: np.ndarray, f1_shift: np.ndarray
    ) -> tuple[np.ndarray, float, float]:
        """Integral for all targets (y1_i, y2_a); arrays indexed (i, j, b)."""
        grid = self.grid
        gap = sl.t * (grid.y2[a] - grid.y2)
        d2 = gap[None, None, :] + sl.f[:, a][:, None, None] - f_shift
        # on the column z1 = y1 the separation must keep the sign of y2 - z2
        column = np.delete(d2[:, 0, :] * np.sign(gap)[None, :], a, axis=1)
        if column.size and float(column.min()) <= 0.0:
            raise ConeViolationError(
                f"separation collapses on the column z1 = y1 at t={sl.t:.3e}, "
                f"y2={grid.y2[a]:.3f} (min signed separation {float(column.min()):.3e})"
            )
        denom = FOUR_PI * (2.0 * np.sinh(0.5 * d2) ** 2 + self._sin2_half[None, :, None])
        with np.errstate(divide="ignore", invalid="ignore"):
            jump = sl.f1[:, a][:, None, None] - f1_shift
            integrand = self._sin_z1[None, :, None] * jump / denom
        integrand[:, 0, :] = 0.0
        out = -grid.h1 * (integrand @ grid.y2_weights).sum(axis=1)

        if not self.statistics:
            return out, 0.0, 0.0
        peak = float(np.max(np.abs(integrand)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(gap)[None, None, :] / np.sqrt(self._z1_sq[None, :, None] + d2**2)
        ratio[:, 0, a] = 0.0
        return out, peak, float(np.max(ratio))


def eval_F(
    eta: np.ndarray,
    gamma: AnalyticGraph,
    s0: NormalVelocity,
    t: float,
    alpha: float,
    grid: SolverGrid,
    mu: float = 1.0,
) -> np.ndarray:
    """One-shot F_t(eta) on the solver grid; builds the operator each call."""
    base = BaseProfile.sample(gamma, s0, grid, mu)
    operator = LevelSetOperator(base, mu=mu)
    return operator.evaluate(base.assemble(t ** (1.0 + alpha) * np.asarray(eta), t)).values
