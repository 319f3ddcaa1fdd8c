"""
Periodic Biot-Savart kernel on the strip T x R.

    G(z) = (1/4pi) log(cosh z2 - cos z1)
    K(z) = grad-perp G = (1/4pi) (-sinh z2, sin z1) / (cosh z2 - cos z1)

The denominator is evaluated as 2 sinh^2(z2/2) + 2 sin^2(z1/2), which keeps
full relative accuracy near the origin and extends verbatim to complex z2.

All functions are vectorised over numpy arrays and pure.

Usage:
    from macroipm.kernel import StripPoint, eval_kernel, eval_k2_complex

    K1, K2 = eval_kernel(0.3, -0.2)
    d2 = eval_k2_complex(StripPoint(0.5, 0.2 + 0.05j), 2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import KernelDomainError, SingularPointError

__all__ = [
    "StripPoint",
    "canonical_angle",
    "star_norm",
    "strip_denominator",
    "eval_green",
    "eval_kernel",
    "k2_derivative",
    "eval_k2_complex",
    "cone_membership",
    "sample_cone",
]

FOUR_PI = 4.0 * np.pi


def canonical_angle(x: ArrayLike) -> NDArray[np.float64] | float:
    """Representative of a torus angle in [-pi, pi)."""
    out = np.mod(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class StripPoint:
    """A pair (a1, a2) with a1 on the torus and a2 possibly complex."""

    a1: float
    a2: complex = 0j

    def __post_init__(self) -> None:
        object.__setattr__(self, "a1", float(canonical_angle(self.a1)))
        object.__setattr__(self, "a2", complex(self.a2))


def star_norm(a: StripPoint) -> float:
    """Anisotropic norm |a|_* = (a1^2 + |a2|^2)^(1/2)."""
    return float(np.sqrt(a.a1**2 + abs(a.a2) ** 2))


def strip_denominator(z1: ArrayLike, z2: ArrayLike) -> np.ndarray:
    """cosh z2 - cos z1 in cancellation-free form; complex z2 allowed."""
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    return 2.0 * np.sinh(0.5 * z2) ** 2 + 2.0 * np.sin(0.5 * z1) ** 2


def _check_regular(z1: ArrayLike, z2: ArrayLike) -> np.ndarray:
    d = strip_denominator(z1, z2)
    if np.any(d == 0.0):
        raise SingularPointError("kernel evaluated at the singular point (0, 0)")
    return d


def eval_green(z1: ArrayLike, z2: ArrayLike) -> np.ndarray | float:
    """Periodic Green's function of the Laplacian on T x R.

    Raises:
        SingularPointError: if any (z1, z2) is the origin modulo 2pi.
    """
    d = _check_regular(z1, z2)
    out = np.log(d) / FOUR_PI
    return float(out) if np.ndim(out) == 0 else out


def eval_kernel(z1: ArrayLike, z2: ArrayLike) -> np.ndarray:
    """Biot-Savart kernel K(z) as an array of shape (2, *broadcast_shape).

    Raises:
        SingularPointError: if any (z1, z2) is the origin modulo 2pi.
    """
    d = _check_regular(z1, z2)
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return np.stack([-np.sinh(z2) / (FOUR_PI * d), np.sin(z1) / (FOUR_PI * d)])


def k2_derivative(a1: ArrayLike, a2: ArrayLike, order: int) -> np.ndarray:
    """Derivative of K2 of the given order in a2, without domain checks.

    Entries where cosh(a2) = cos(a1) come out as inf or nan; callers own the
    singular-node policy.
    """
    a1 = np.asarray(a1)
    a2 = np.asarray(a2)
    s = np.sin(a1)
    d = strip_denominator(a1, a2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if order == 0:
            return s / (FOUR_PI * d)
        if order == 1:
            return -s * np.sinh(a2) / (FOUR_PI * d**2)
        if order == 2:
            sh = np.sinh(a2)
            return s * (2.0 * sh**2 - np.cosh(a2) * d) / (FOUR_PI * d**3)
    raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")


def eval_k2_complex(a: StripPoint, order: int) -> complex:
    """Complex derivative of K2 in a2 of order 0, 1 or 2.

    Raises:
        KernelDomainError: if cosh(a2) = cos(a1).
    """
    if abs(complex(strip_denominator(a.a1, a.a2))) == 0.0:
        raise KernelDomainError(f"cosh(a2) = cos(a1) at {a}")
    return complex(k2_derivative(a.a1, a.a2, order))


def cone_membership(a: StripPoint, kappa: float) -> bool:
    """True iff |Im a2| < kappa(|a1| + |Re a2|) and |Im a2| < pi/2."""
    if not 0.0 < kappa < 0.5:
        raise ValueError(f"kappa must lie in (0, 1/2), got {kappa}")
    im = abs(a.a2.imag)
    return bool(im < kappa * (abs(a.a1) + abs(a.a2.real)) and im < 0.5 * np.pi)


def sample_cone(
    n: int,
    kappa: float,
    rng: np.random.Generator,
    norm_range: tuple[float, float] = (1e-3, 3.0),
) -> list[StripPoint]:
    """Draw n points of U^kappa with |a|_* log-uniform in norm_range.

    The cone condition is homogeneous of degree one, so directions are drawn
    at unit scale and rescaled; the rare draws that break |Im a2| < pi/2 are
    redrawn.
    """
    lo, hi = np.log(norm_range[0]), np.log(norm_range[1])
    points: list[StripPoint] = []
    while len(points) < n:
        a1, re = rng.uniform(-1.0, 1.0, size=2)
        im = rng.uniform(-1.0, 1.0) * kappa * (abs(a1) + abs(re))
        r = np.exp(rng.uniform(lo, hi)) / np.sqrt(a1**2 + re**2 + im**2)
        candidate = StripPoint(r * a1, complex(r * re, r * im))
        if cone_membership(candidate, kappa):
            points.append(candidate)
    return points
