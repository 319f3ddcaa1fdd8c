"""
Level-set ansatz f(t, y) = gamma0(y1) + t s0(y1) + 1/2 t^(1+alpha) eta(t, y)
and the induced transform X_t(y) = (y1, t y2 + f(t, y)).

Inside the solver everything runs in solver time tau = mu * t with the
normal velocity s0 / mu, so the mu-variant needs no separate solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from ..errors import MonotonicityError
from ..initial_data import AnalyticGraph, NormalVelocity
from .grid import SolverGrid
from .trajectory import EtaTrajectory

__all__ = ["BaseProfile", "LevelSetSlice", "AnsatzField", "assemble_f"]


@dataclass(frozen=True, eq=False)
class BaseProfile:
    """gamma0 and the solver-time normal velocity sampled on the solver grid."""

    grid: SolverGrid
    gamma: np.ndarray
    gamma1: np.ndarray
    s0: np.ndarray
    s0_1: np.ndarray

    @classmethod
    def sample(
        cls, gamma: AnalyticGraph, s0: NormalVelocity, grid: SolverGrid, mu: float = 1.0
    ) -> BaseProfile:
        y1 = grid.y1
        return cls(
            grid=grid,
            gamma=gamma.sample(y1),
            gamma1=gamma.sample(y1, 1),
            s0=s0(y1) / mu,
            s0_1=s0(y1, 1) / mu,
        )

    @property
    def is_flat(self) -> bool:
        return not (np.any(self.gamma) or np.any(self.s0))

    def assemble(self, weighted: np.ndarray, t: float) -> LevelSetSlice:
        """Slice from g = t^(1+alpha) eta; f = gamma0 + t s0 + g/2."""
        grid = self.grid
        half_g = 0.5 * weighted
        f = (self.gamma + t * self.s0)[:, None] + half_g
        f1 = (self.gamma1 + t * self.s0_1)[:, None] + grid.d1(half_g)
        f2 = grid.d2(half_g)
        return LevelSetSlice(t=t, f=f, f1=f1, f2=f2)


@dataclass(frozen=True, eq=False)
class LevelSetSlice:
    """f and its first derivatives at one solver time, shape (n_phys, n2)."""

    t: float
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    def check_monotone(self) -> float:
        """min of t + d_y2 f; must be positive for t > 0.

        Raises:
            MonotonicityError: if y2 -> t y2 + f is not strictly increasing.
        """
        slope = float(np.min(self.t + self.f2))
        if self.t > 0.0 and slope <= 0.0:
            raise MonotonicityError(
                f"t + d_y2 f reaches {slope:.3e} at t={self.t:.3e}; level-set map not monotone"
            )
        return slope


def assemble_f(
    gamma: AnalyticGraph,
    s0: NormalVelocity,
    eta: np.ndarray,
    t: float,
    alpha: float,
    grid: SolverGrid,
) -> LevelSetSlice:
    """f(t, .) on the solver grid with d_y1 f spectral and d_y2 f fourth-order."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    base = BaseProfile.sample(gamma, s0, grid)
    return base.assemble(t ** (1.0 + alpha) * np.asarray(eta), t)


class AnsatzField:
    """
    The solved level-set function and the transform it induces.

    Public methods take physical time t; the solver trajectory is indexed by
    tau = mu * t.

    Usage:
        field = AnsatzField(gamma, s0, trajectory)
        columns = field.columns(t, x1)   # t*y2 + f on the y2 nodes per x1
    """

    def __init__(self, gamma: AnalyticGraph, s0: NormalVelocity, eta: EtaTrajectory) -> None:
        self.gamma = gamma
        self.s0 = s0
        self.eta = eta
        self.grid = eta.grid
        self.mu = eta.mu
        self.alpha = eta.alpha

    @cached_property
    def base(self) -> BaseProfile:
        return BaseProfile.sample(self.gamma, self.s0, self.grid, self.mu)

    @property
    def horizon(self) -> float:
        """Largest physical time covered by the trajectory."""
        return self.eta.horizon / self.mu

    def solver_time(self, t: float) -> float:
        if t < 0.0:
            raise ValueError(f"t must be >= 0, got {t}")
        return self.mu * t

    def slice(self, t: float) -> LevelSetSlice:
        tau = self.solver_time(t)
        return self.base.assemble(self.eta.weighted_at(tau), tau)

    def f_at(self, t: float, x1: ArrayLike) -> np.ndarray:
        """f(tau, x1, y2_nodes) for arbitrary x1, shape (len(x1), n2)."""
        tau = self.solver_time(t)
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        g = self.eta.weighted_at(tau)
        smooth = self.gamma.sample(x1) + tau * self.s0(x1) / self.mu
        return smooth[:, None] + 0.5 * self.grid.interpolate_y1(g, x1)

    def columns(self, t: float, x1: ArrayLike) -> np.ndarray:
        """X_t second component tau*y2 + f on the y2 nodes, shape (len(x1), n2)."""
        tau = self.solver_time(t)
        return tau * self.grid.y2[None, :] + self.f_at(t, x1)

    def transform(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """X_t on the solver grid: (y1 broadcast, tau*y2 + f)."""
        sl = self.slice(t)
        x2 = sl.t * self.grid.y2[None, :] + sl.f
        return np.broadcast_to(self.grid.y1[:, None], x2.shape), x2
