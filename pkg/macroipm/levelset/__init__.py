"""
Level-set construction of the mixing-zone solution.

The unknown is the correction eta in the ansatz
f = gamma0 + t s0 + 1/2 t^(1+alpha) eta, found by a weighted Picard iteration
on the closed equation for f.

Usage:
    from macroipm.levelset import solve_eta, AnsatzField

    trajectory, report = solve_eta(gamma, horizon=0.05, alpha=0.5)
    field = AnsatzField(gamma, s0, trajectory)
"""

from .ansatz import AnsatzField, BaseProfile, LevelSetSlice, assemble_f
from .grid import SolverGrid
from .operator import LevelSetOperator, OperatorEvaluation, eval_F
from .picard import (
    ConvergenceReport,
    geometric_time_grid,
    graded_mesh,
    solve_eta,
    time_weighted_average,
)
from .trajectory import EtaTrajectory, read_checkpoint, write_checkpoint

__all__ = [
    "AnsatzField",
    "BaseProfile",
    "LevelSetSlice",
    "assemble_f",
    "SolverGrid",
    "LevelSetOperator",
    "OperatorEvaluation",
    "eval_F",
    "ConvergenceReport",
    "geometric_time_grid",
    "graded_mesh",
    "solve_eta",
    "time_weighted_average",
    "EtaTrajectory",
    "read_checkpoint",
    "write_checkpoint",
]
