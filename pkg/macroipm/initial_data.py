"""
Analytic initial interface and the velocity it induces at t = 0.

The interface x2 = gamma0(x1) is stored as a truncated Fourier series. From it
we derive the certified strip radius rho0, the normal velocity s0 of the
interface, and the vortex-sheet velocity field v0 together with its one-sided
limits on the interface.

Usage:
    from macroipm.initial_data import AnalyticGraph, compute_s0, initial_velocity

    gamma = AnalyticGraph.cosine(0.1, 1)
    s0 = compute_s0(gamma, n_quad=512)
    v_above = initial_velocity(gamma, [0.3, gamma.sample(0.3)], mode="limit_above")
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .errors import InvalidGraphError, ProximityWarning, QuadratureWarning, StripViolationError
from .kernel import FOUR_PI, eval_kernel, strip_denominator

logger = logging.getLogger(__name__)

__all__ = [
    "AnalyticGraph",
    "NormalVelocity",
    "graph_eval",
    "estimate_strip_radius",
    "compute_s0",
    "linearized_normal_velocity",
    "initial_velocity",
    "dump_graph",
    "load_graph",
    "S0_SELF_CONVERGENCE_TOL",
]

RHO0_CAP = 1.0
S0_SELF_CONVERGENCE_TOL = 1e-8
DEFAULT_N_MODES = 64
SYMMETRY_TOL = 1e-12

VelocityMode = Literal["off_interface", "limit_above", "limit_below"]


def _wavenumbers(coeffs: np.ndarray) -> np.ndarray:
    n = (len(coeffs) - 1) // 2
    return np.arange(-n, n + 1)


def _fourier_sum(coeffs: np.ndarray, y1: ArrayLike, order: int) -> np.ndarray:
    """Sum_k (ik)^order c_k exp(ik y1), vectorised over y1."""
    k = _wavenumbers(coeffs)
    y = np.asarray(y1, dtype=complex)
    weights = coeffs * (1j * k) ** order
    phase = np.exp(1j * np.multiply.outer(y, k))
    return phase @ weights


def estimate_strip_radius(coeffs: ArrayLike, cap: float = RHO0_CAP) -> float:
    """Largest rho0 <= cap with 8 sum_k |k c_k| sinh(|k| rho0) < 1.

    The coefficient sum bounds 4 sup |Im gamma0'| on the strip |Im y1| < rho0,
    so the returned radius certifies that condition.
    """
    c = np.asarray(coeffs, dtype=complex)
    k = np.abs(_wavenumbers(c)).astype(float)
    weights = 8.0 * k * np.abs(c)

    def excess(rho: float) -> float:
        return float(np.sum(weights * np.sinh(k * rho))) - 1.0

    if excess(cap) < 0.0:
        return cap
    root = brentq(excess, 0.0, cap, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return root * (1.0 - 1e-12)


@dataclass(frozen=True, eq=False)
class AnalyticGraph:
    """Initial interface gamma0 with Fourier coefficients c_k, k = -N..N."""

    coeffs: NDArray[np.complex128]
    rho0: float

    @classmethod
    def from_coeffs(cls, coeffs: ArrayLike, rho0: float | None = None) -> AnalyticGraph:
        """Validate conjugate symmetry and attach a certified strip radius.

        Raises:
            InvalidGraphError: if the list has even length, non-finite entries
                or breaks c_{-k} = conj(c_k).
        """
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 1 or len(c) % 2 == 0:
            raise InvalidGraphError("coefficients must be indexed k = -N..N (odd length)")
        if not np.all(np.isfinite(c)):
            raise InvalidGraphError("coefficients must be finite")
        scale = max(1.0, float(np.max(np.abs(c))))
        mismatch = np.max(np.abs(c[::-1] - np.conj(c)))
        if mismatch > SYMMETRY_TOL * scale:
            raise InvalidGraphError(
                f"conjugate symmetry c_-k = conj(c_k) broken (max mismatch {mismatch:.3e})"
            )
        # Symmetrise to remove rounding-level asymmetry.
        c = 0.5 * (c + np.conj(c[::-1]))
        c.setflags(write=False)
        radius = estimate_strip_radius(c) if rho0 is None else float(rho0)
        return cls(coeffs=c, rho0=radius)

    @classmethod
    def from_modes(cls, modes: dict[int, complex], n_modes: int | None = None) -> AnalyticGraph:
        """Build from a sparse {k: c_k} map; missing negative modes get the conjugate."""
        top = max([abs(k) for k in modes] + [0])
        n = top if n_modes is None else max(n_modes, top)
        c = np.zeros(2 * n + 1, dtype=complex)
        for k, value in modes.items():
            c[k + n] = value
        for k, value in modes.items():
            if -k not in modes:
                c[-k + n] = np.conj(value)
        return cls.from_coeffs(c)

    @classmethod
    def flat(cls) -> AnalyticGraph:
        return cls.from_coeffs([0.0])

    @classmethod
    def cosine(cls, amplitude: float, wavenumber: int = 1) -> AnalyticGraph:
        """gamma0(x1) = amplitude * cos(wavenumber * x1)."""
        if wavenumber < 1:
            raise InvalidGraphError(f"wavenumber must be >= 1, got {wavenumber}")
        half = 0.5 * amplitude
        return cls.from_modes({wavenumber: half, -wavenumber: half})

    @property
    def n_modes(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def wavenumbers(self) -> np.ndarray:
        return _wavenumbers(self.coeffs)

    @property
    def is_flat(self) -> bool:
        return not np.any(self.coeffs)

    def sample(self, x1: ArrayLike, order: int = 0) -> np.ndarray:
        """Real values of the order-th derivative on real points."""
        return _fourier_sum(self.coeffs, np.asarray(x1, dtype=float), order).real

    def max_abs(self, n: int = 1024) -> float:
        x = 2.0 * np.pi * np.arange(n) / n
        return float(np.max(np.abs(self.sample(x)))) if not self.is_flat else 0.0


def graph_eval(gamma: AnalyticGraph, y1: ArrayLike, order: int = 0) -> np.ndarray | complex:
    """Complex evaluation of gamma0 or one of its first three derivatives.

    Raises:
        StripViolationError: if |Im y1| > gamma.rho0.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be 0..3, got {order}")
    y = np.asarray(y1, dtype=complex)
    if np.any(np.abs(y.imag) > gamma.rho0):
        raise StripViolationError(
            f"|Im y1| = {np.max(np.abs(y.imag)):.6g} exceeds strip radius {gamma.rho0:.6g}"
        )
    out = _fourier_sum(gamma.coeffs, y, order)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class NormalVelocity:
    """Fourier coefficients of s0, k = -N..N."""

    coeffs: NDArray[np.complex128]
    n_quad: int = 0
    self_convergence: float | None = field(default=None, compare=False)

    @classmethod
    def from_samples(cls, values: np.ndarray, n_modes: int, **kwargs) -> NormalVelocity:
        """Project equispaced periodic samples onto modes -n_modes..n_modes."""
        n = len(values)
        if 2 * n_modes + 1 > n:
            raise ValueError(f"{n} samples cannot resolve {n_modes} modes")
        spectrum = np.fft.fft(values) / n
        k = np.arange(-n_modes, n_modes + 1)
        return cls(coeffs=spectrum[k % n], **kwargs)

    @classmethod
    def zero(cls) -> NormalVelocity:
        return cls(coeffs=np.zeros(1, dtype=complex))

    @property
    def n_modes(self) -> int:
        return (len(self.coeffs) - 1) // 2

    def __call__(self, x1: ArrayLike, order: int = 0) -> np.ndarray:
        return _fourier_sum(self.coeffs, np.asarray(x1, dtype=float), order).real

    def evaluate_complex(self, x1: ArrayLike, order: int = 0) -> np.ndarray:
        return _fourier_sum(self.coeffs, x1, order)

    def scaled(self, factor: float) -> NormalVelocity:
        return NormalVelocity(self.coeffs * factor, self.n_quad, self.self_convergence)


# ---------------------------------------------------------------------------
# Normal velocity s0
# ---------------------------------------------------------------------------


def _s0_samples(gamma: AnalyticGraph, n_quad: int, chunk: int = 256) -> np.ndarray:
    """s0 on the n_quad-point grid by the periodic trapezoid rule in z1.

    Targets y1 and nodes z1 share the grid, so y1 - z1 is an index shift.
    """
    x = 2.0 * np.pi * np.arange(n_quad) / n_quad
    g = gamma.sample(x)
    g1 = gamma.sample(x, 1)
    g2 = gamma.sample(x, 2)
    h = 2.0 * np.pi / n_quad

    z1 = x[None, :]
    out = np.empty(n_quad)
    for start in range(0, n_quad, chunk):
        rows = np.arange(start, min(start + chunk, n_quad))
        shifted = (rows[:, None] - np.arange(n_quad)[None, :]) % n_quad
        dz2 = g[rows, None] - g[shifted]
        d = strip_denominator(z1, dz2)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.sin(z1) / (FOUR_PI * d) * (g1[rows, None] - g1[shifted])
        # Column z1 = 0 holds the removable singularity; use its limit.
        integrand[:, 0] = g2[rows] / (2.0 * np.pi * (1.0 + g1[rows] ** 2))
        out[rows] = -2.0 * h * integrand.sum(axis=1)
    return out


def compute_s0(
    gamma: AnalyticGraph,
    n_quad: int = 4 * DEFAULT_N_MODES,
    n_modes: int = DEFAULT_N_MODES,
    check: bool = True,
) -> NormalVelocity:
    """Normal velocity of the interface at t = 0.

        s0(y1) = -2 int_T K2(z1, gamma0(y1) - gamma0(y1 - z1)) (gamma0'(y1) - gamma0'(y1 - z1)) dz1

    The integrand is continuous at z1 = 0 with limit gamma0''/(2pi(1 + gamma0'^2)).

    Args:
        gamma: initial interface
        n_quad: trapezoid nodes in z1 (>= 16)
        n_modes: Fourier modes kept in the result
        check: compare against 2*n_quad nodes and warn above S0_SELF_CONVERGENCE_TOL

    Returns:
        NormalVelocity projected onto modes -n_modes..n_modes
    """
    if n_quad < 16:
        raise ValueError(f"n_quad must be >= 16, got {n_quad}")
    if gamma.is_flat:
        return NormalVelocity(np.zeros(2 * n_modes + 1, dtype=complex), n_quad, 0.0)

    modes = min(n_modes, (n_quad - 1) // 2)
    s0 = NormalVelocity.from_samples(_s0_samples(gamma, n_quad), modes, n_quad=n_quad)
    if not check:
        return s0

    fine = NormalVelocity.from_samples(_s0_samples(gamma, 2 * n_quad), modes, n_quad=2 * n_quad)
    x = 2.0 * np.pi * np.arange(n_quad) / n_quad
    gap = float(np.max(np.abs(s0(x) - fine(x))))
    logger.debug("s0 self-convergence n_quad=%d gap=%.3e", n_quad, gap)
    if gap > S0_SELF_CONVERGENCE_TOL:
        warnings.warn(
            f"s0 quadrature not converged: n_quad={n_quad} vs {2 * n_quad} differ by {gap:.3e}",
            QuadratureWarning,
            stacklevel=2,
        )
    return NormalVelocity(s0.coeffs, n_quad, gap)


def linearized_normal_velocity(gamma: AnalyticGraph) -> NormalVelocity:
    """First-order normal velocity |d/dx1| gamma0 of the linearised interface problem."""
    return NormalVelocity(gamma.coeffs * np.abs(gamma.wavenumbers))


# ---------------------------------------------------------------------------
# Vortex-sheet velocity
# ---------------------------------------------------------------------------


def initial_velocity(
    gamma: AnalyticGraph,
    x: ArrayLike,
    mode: VelocityMode = "off_interface",
    n_quad: int = 1024,
) -> np.ndarray:
    """Velocity induced by the vortex sheet of strength 2 gamma0' on the interface.

    Args:
        gamma: initial interface
        x: point(s) of shape (2,) or (2, m)
        mode: 'off_interface' evaluates the sheet integral off the curve; the
            limit modes return the one-sided traces from above or below
        n_quad: trapezoid nodes along the sheet

    Returns:
        Velocity of shape (2,) or (2, m)
    """
    pts = np.asarray(x, dtype=float)
    x1 = np.atleast_1d(pts[0])
    x2 = np.atleast_1d(pts[1])
    h = 2.0 * np.pi / n_quad
    gap = x2 - gamma.sample(x1)

    if mode == "off_interface":
        if np.any(gap == 0.0):
            raise ValueError("off_interface velocity requested on the interface")
        if np.any(np.abs(gap) < 5.0 * h):
            warnings.warn(
                f"point within {np.min(np.abs(gap)):.2e} of the interface; "
                f"quadrature with n_quad={n_quad} degrades below {5.0 * h:.2e}",
                ProximityWarning,
                stacklevel=2,
            )
        z = np.broadcast_to(2.0 * np.pi * np.arange(n_quad) / n_quad, (len(x1), n_quad))
    elif mode in ("limit_above", "limit_below"):
        if np.any(np.abs(gap) > 1e-8):
            raise ValueError(f"{mode} requires points on the interface")
        # Offset nodes sit symmetrically about x1 and never hit it.
        z = x1[:, None] + (np.arange(n_quad)[None, :] + 0.5) * h
    else:
        raise ValueError(f"unknown mode {mode!r}")

    strength = 2.0 * gamma.sample(z, 1)
    k = eval_kernel(x1[:, None] - z, x2[:, None] - gamma.sample(z))
    v = h * np.sum(k * strength[None], axis=-1)

    if mode != "off_interface":
        slope = gamma.sample(x1, 1)
        jump = slope / (1.0 + slope**2) * np.stack([np.ones_like(slope), slope])
        v = v - jump if mode == "limit_above" else v + jump
    return v[:, 0] if pts.ndim == 1 else v


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def dump_graph(gamma: AnalyticGraph) -> str:
    """Structured text: header lines, then 'k re im' per mode."""
    lines = [
        "# AnalyticGraph",
        f"rho0: {gamma.rho0!r}",
        f"n_modes: {gamma.n_modes}",
        "k re im",
    ]
    for k, c in zip(gamma.wavenumbers, gamma.coeffs):
        lines.append(f"{int(k)} {float(c.real)!r} {float(c.imag)!r}")
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> AnalyticGraph:
    """Inverse of dump_graph; exact round trip."""
    rho0: float | None = None
    modes: dict[int, complex] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line == "k re im":
            continue
        if line.startswith("rho0:"):
            rho0 = float(line.split(":", 1)[1])
        elif line.startswith("n_modes:"):
            continue
        else:
            k, re, im = line.split()
            modes[int(k)] = complex(float(re), float(im))
    n = max([abs(k) for k in modes] + [0])
    c = np.zeros(2 * n + 1, dtype=complex)
    for k, value in modes.items():
        c[k + n] = value
    return AnalyticGraph.from_coeffs(c, rho0=rho0)
