"""
Exception and warning hierarchy for macro-ipm.

Every error raised on purpose by the package derives from MacroIPMError and
carries the process exit code the CLI should use when it surfaces.

Exit codes:
 0 success
 1 numerical failure (maximum principle, monotonicity, boundary contamination)
 2 invalid configuration or input data
 3 solver divergence or stagnation
 4 missing artifact
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .levelset.picard import ConvergenceReport

__all__ = [
    "MacroIPMError",
    "ConfigError",
    "ConfigParseError",
    "ConfigValidationError",
    "InvalidGraphError",
    "SingularPointError",
    "KernelDomainError",
    "StripViolationError",
    "MonotonicityError",
    "ConeViolationError",
    "SolverDivergenceError",
    "StagnationError",
    "MaximumPrincipleError",
    "BoundaryContaminationError",
    "MassMismatchError",
    "MissingArtifactError",
    "QuadratureWarning",
    "ProximityWarning",
    "BoundaryContaminationWarning",
    "ConvergenceWarning",
    "MonotonicityWarning",
]


class MacroIPMError(Exception):
    """Base class for all package errors."""

    exit_code: int = 1


# ---------------------------------------------------------------------------
# Configuration and input validation (exit 2)
# ---------------------------------------------------------------------------


class ConfigError(MacroIPMError):
    """Run configuration could not be loaded."""

    exit_code = 2


class ConfigParseError(ConfigError):
    """YAML syntax error; message carries '<path>:<line>: <problem>'."""


class ConfigValidationError(ConfigError):
    """Config parsed but a field is invalid; message names the dotted field path."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidGraphError(MacroIPMError, ValueError):
    """Interface coefficients do not describe a real analytic graph."""

    exit_code = 2


# ---------------------------------------------------------------------------
# Kernel and geometry
# ---------------------------------------------------------------------------


class SingularPointError(MacroIPMError, ValueError):
    """Kernel or Green's function evaluated at the origin of the strip."""


class KernelDomainError(MacroIPMError, ValueError):
    """Complex kernel evaluated where cosh(a2) = cos(a1)."""


class StripViolationError(MacroIPMError, ValueError):
    """Graph evaluated outside its certified strip of analyticity."""


class MonotonicityError(MacroIPMError):
    """y2 -> t*y2 + f(t, y1, y2) is not strictly increasing."""


class ConeViolationError(MacroIPMError):
    """A separation vector collapsed to zero away from the singular node."""


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


class SolverDivergenceError(MacroIPMError):
    """Picard iterate left the unit ball; the horizon T is too large."""

    exit_code = 3

    def __init__(self, message: str, report: ConvergenceReport | None = None) -> None:
        super().__init__(message)
        self.report = report


class StagnationError(SolverDivergenceError):
    """Picard iteration hit max_iters without meeting the convergence rule."""


class MaximumPrincipleError(MacroIPMError):
    """Finite-volume density left [-1, 1]."""


class BoundaryContaminationError(MacroIPMError):
    """Mixing zone reached the top or bottom rows of the strip."""


class MassMismatchError(MacroIPMError, ValueError):
    """Wasserstein distance requested between densities of different mass."""


class MissingArtifactError(MacroIPMError):
    """A subcommand needs an artifact that an earlier subcommand did not write."""

    exit_code = 4


# ---------------------------------------------------------------------------
# Warnings
# ---------------------------------------------------------------------------


class QuadratureWarning(UserWarning):
    """Quadrature self-convergence check failed."""


class ProximityWarning(UserWarning):
    """Off-interface velocity requested too close to the interface."""


class BoundaryContaminationWarning(UserWarning):
    """Pure phases not reached on the boundary rows of an Eulerian grid."""


class ConvergenceWarning(UserWarning):
    """An inner optimizer stopped at its iteration cap; the best iterate is returned."""


class MonotonicityWarning(UserWarning):
    """A minimizing-movement iterate lost monotonicity in y."""
