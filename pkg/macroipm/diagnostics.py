"""
Diagnostics on exported Eulerian fields.

Everything here takes DensityField / VelocityField / FluxField samples (or
LevelCurves), never solver internals, so the same checks run on level-set
and finite-volume output alike.

Usage:
    rho0 = InitialDensity(gamma)
    records = build_records(densities, velocities, fluxes, rho0)
    write_records(records, out_dir / "diagnostics")
"""

from __future__ import annotations

import csv
import logging
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import cumulative_trapezoid

from .errors import BoundaryContaminationWarning
from .initial_data import AnalyticGraph, NormalVelocity
from .reconstruction import DensityField, EulerianGrid, FluxField, LevelCurves, VelocityField

logger = logging.getLogger(__name__)

__all__ = [
    "DiagnosticsRecord",
    "InitialDensity",
    "Entropy",
    "DEFAULT_ENTROPIES",
    "FlatOracle",
    "ExpansionFit",
    "relative_potential_energy",
    "mass_error",
    "dissipation_identity",
    "entropy_residual",
    "hull_check",
    "flat_oracle",
    "expansion_check",
    "lipschitz_constant",
    "transport_residual",
    "log_lipschitz_modulus",
    "velocity_decay",
    "decay_ratio",
    "mixing_zone_area",
    "mixing_width",
    "build_records",
    "write_records",
]

BOUNDARY_TOL = 1e-6
MIXING_TOL = 1e-8


# ---------------------------------------------------------------------------
# Initial step profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InitialDensity:
    """rho0 = +1 above gamma0 and -1 below, with exact x2-moments per column."""

    gamma: AnalyticGraph

    def sample(self, grid: EulerianGrid) -> np.ndarray:
        X1, X2 = grid.mesh()
        return np.where(X2 > self.gamma.sample(X1), 1.0, -1.0)

    def mass(self, grid: EulerianGrid) -> float:
        """int rho0 dx = sum_x1 dx1 * (-2 gamma0)."""
        return float(grid.dx1 * np.sum(-2.0 * self.gamma.sample(grid.x1)))

    def first_moment(self, grid: EulerianGrid) -> float:
        """int rho0 x2 dx = sum_x1 dx1 * (L^2 - gamma0^2)."""
        g = self.gamma.sample(grid.x1)
        return float(grid.dx1 * np.sum(grid.half_height**2 - g**2))


def _check_boundary(density: DensityField) -> None:
    top = np.max(np.abs(density.rho[:, -1] - 1.0))
    bottom = np.max(np.abs(density.rho[:, 0] + 1.0))
    if max(top, bottom) > BOUNDARY_TOL:
        warnings.warn(
            f"pure phases not reached on the boundary rows at t={density.time:.4g} "
            f"(deviation {max(top, bottom):.2e}); enlarge half_height",
            BoundaryContaminationWarning,
            stacklevel=3,
        )


def relative_potential_energy(density: DensityField, rho0: InitialDensity) -> float:
    """E_rel = int (rho - rho0) x2 dx."""
    _check_boundary(density)
    grid = density.grid
    _, X2 = grid.mesh()
    return grid.integrate(density.rho * X2) - rho0.first_moment(grid)


def mass_error(density: DensityField, rho0: InitialDensity) -> float:
    grid = density.grid
    return grid.integrate(density.rho) - rho0.mass(grid)


def _times(fields: Sequence) -> np.ndarray:
    times = np.array([f.time for f in fields], dtype=float)
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("time nodes must increase strictly")
    return times


def dissipation_identity(
    densities: Sequence[DensityField], fluxes: Sequence[FluxField], rho0: InitialDensity
) -> tuple[np.ndarray, np.ndarray]:
    """(dE_rel/dt by centred differences, int m2 dx) per time node."""
    if len(densities) < 3 or len(fluxes) != len(densities):
        raise ValueError("dissipation identity needs >= 3 matching time nodes")
    times = _times(densities)
    energy = np.array([relative_potential_energy(d, rho0) for d in densities])
    lhs = np.gradient(energy, times, edge_order=2)
    rhs = np.array([f.grid.integrate(f.m[1]) for f in fluxes])
    return lhs, rhs


# ---------------------------------------------------------------------------
# Entropy balances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Entropy:
    """Convex entropy eta with flux Q(rho) = int_0^rho 2 eta'(s) s ds (before the mu factor)."""

    name: str
    eta: Callable[[np.ndarray], np.ndarray]
    flux: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def identity(cls) -> Entropy:
        return cls("s", lambda s: s, lambda s: s**2)

    @classmethod
    def square(cls) -> Entropy:
        return cls("s^2", lambda s: s**2, lambda s: 4.0 * s**3 / 3.0)

    @classmethod
    def kruzhkov(cls, c: float) -> Entropy:
        def flux(s: np.ndarray) -> np.ndarray:
            return np.sign(s - c) * (s**2 - c**2) - c * abs(c)

        return cls(f"kruzhkov({c:g})", lambda s: np.abs(s - c), flux)

    @classmethod
    def custom(
        cls,
        name: str,
        eta: Callable[[np.ndarray], np.ndarray],
        derivative: Callable[[np.ndarray], np.ndarray],
        n_table: int = 4097,
    ) -> Entropy:
        """Q tabulated on [-1, 1] by the trapezoid rule and read back linearly."""
        s = np.linspace(-1.0, 1.0, n_table)
        q = cumulative_trapezoid(2.0 * derivative(s) * s, s, initial=0.0)
        q -= np.interp(0.0, s, q)
        return cls(name, eta, lambda r: np.interp(r, s, q))


DEFAULT_ENTROPIES: tuple[Entropy, ...] = (
    Entropy.identity(),
    Entropy.square(),
    Entropy.kruzhkov(-0.5),
    Entropy.kruzhkov(0.0),
    Entropy.kruzhkov(0.3),
)


def _d1(values: np.ndarray, dx1: float) -> np.ndarray:
    return (np.roll(values, -1, axis=-2) - np.roll(values, 1, axis=-2)) / (2.0 * dx1)


def _d2(values: np.ndarray, dx2: float) -> np.ndarray:
    return np.gradient(values, dx2, axis=-1)


def _interior(grid: EulerianGrid) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    mask[:, [0, -1]] = False
    return mask


def entropy_residual(
    densities: Sequence[DensityField],
    velocities: Sequence[VelocityField],
    entropy: Entropy,
) -> np.ndarray:
    """L1 norm over interior points of d_t eta(rho) + div(eta(rho) v + mu Q(rho) e2), per node."""
    if len(densities) < 2 or len(velocities) != len(densities):
        raise ValueError("entropy residual needs >= 2 matching time nodes")
    times = _times(densities)
    grid = densities[0].grid
    mu = densities[0].mu
    rho = np.stack([d.rho for d in densities])
    v = np.stack([u.v for u in velocities])  # (n_t, 2, n1, n2)
    eta = entropy.eta(rho)
    dt = np.gradient(eta, times, axis=0)
    div = _d1(eta * v[:, 0], grid.dx1) + _d2(eta * v[:, 1] + mu * entropy.flux(rho), grid.dx2)
    residual = np.abs(dt + div) * _interior(grid)
    return np.array([grid.integrate(r) for r in residual])


def transport_residual(
    densities: Sequence[DensityField],
    velocities: Sequence[VelocityField],
    margin: float = 1e-6,
) -> np.ndarray:
    """L1 norm of d_t rho + v . grad rho + 2 mu rho d_x2 rho over interior mixing-zone points."""
    if len(densities) < 2 or len(velocities) != len(densities):
        raise ValueError("transport residual needs >= 2 matching time nodes")
    times = _times(densities)
    grid = densities[0].grid
    mu = densities[0].mu
    rho = np.stack([d.rho for d in densities])
    v = np.stack([u.v for u in velocities])
    r1 = _d1(rho, grid.dx1)
    r2 = _d2(rho, grid.dx2)
    residual = np.gradient(rho, times, axis=0) + v[:, 0] * r1 + (v[:, 1] + 2.0 * mu * rho) * r2
    zone = (np.abs(rho) < 1.0 - margin) & _interior(grid)
    return np.array([grid.integrate(np.abs(r) * z) for r, z in zip(residual, zone)])


# ---------------------------------------------------------------------------
# Pointwise constraints and closed forms
# ---------------------------------------------------------------------------


def hull_check(density: DensityField, velocity: VelocityField, flux: FluxField) -> float:
    """max of |2(m - rho v) + (1 - rho^2) e2| - (1 - rho^2); 0 for mu = 1, <= 0 for mu < 1."""
    rho, v, m = density.rho, velocity.v, flux.m
    gap = 1.0 - rho**2
    a1 = 2.0 * (m[0] - rho * v[0])
    a2 = 2.0 * (m[1] - rho * v[1]) + gap
    return float(np.max(np.hypot(a1, a2) - gap))


@dataclass(frozen=True)
class FlatOracle:
    rho: np.ndarray | float
    v2: np.ndarray | float
    m2: np.ndarray | float
    e_rel: float
    de_dt: float


def flat_oracle(t: float, x2: ArrayLike, mu: float = 1.0) -> FlatOracle:
    """Exact flat-interface solution: rho = clamp(x2 / (2 mu t)), v = 0, m2 = -mu (1 - rho^2)."""
    if not t > 0.0:
        raise ValueError(f"flat oracle needs t > 0, got {t}")
    x = np.asarray(x2, dtype=float)
    rho = np.clip(x / (2.0 * mu * t), -1.0, 1.0)
    m2 = -mu * (1.0 - rho**2)
    if rho.ndim == 0:
        rho, m2 = float(rho), float(m2)
    return FlatOracle(
        rho=rho,
        v2=0.0 * rho,
        m2=m2,
        e_rel=-8.0 * np.pi * mu**2 * t**2 / 3.0,
        de_dt=-16.0 * np.pi * mu**2 * t / 3.0,
    )


@dataclass(frozen=True, eq=False)
class ExpansionFit:
    """Log-log fit of the expansion remainder against t."""

    times: np.ndarray
    remainders: np.ndarray
    slope: float
    intercept: float
    exact_zero: bool


def expansion_check(
    curves: Sequence[LevelCurves],
    gamma: AnalyticGraph,
    s0: NormalVelocity,
    mu: float = 1.0,
    zero_tol: float = 1e-13,
) -> ExpansionFit:
    """Slope of log sup |gamma_t - gamma0 - t (2 mu h + s0)| against log t."""
    times = np.array([c.time for c in curves])
    if len(curves) < 4 or times.min() <= 0.0 or times.max() < 10.0 * times.min():
        raise ValueError("expansion check needs >= 4 positive times spanning a decade")
    remainders = []
    for c in curves:
        linear = c.time * (2.0 * mu * c.h[:, None] + s0(c.x1)[None, :])
        remainders.append(float(np.max(np.abs(c.gamma - gamma.sample(c.x1)[None, :] - linear))))
    r = np.array(remainders)
    if np.all(r <= zero_tol):
        return ExpansionFit(times, r, float("nan"), float("nan"), exact_zero=True)
    slope, intercept = np.polyfit(np.log(times), np.log(r), 1)
    logger.info(
        "expansion remainder slope %.3f over t in [%.2g, %.2g]", slope, times.min(), times.max()
    )
    return ExpansionFit(times, r, float(slope), float(intercept), exact_zero=False)


# ---------------------------------------------------------------------------
# Regularity and geometry
# ---------------------------------------------------------------------------


def lipschitz_constant(density: DensityField) -> float:
    """t * sup |grad rho| by centred differences."""
    grid = density.grid
    g1 = _d1(density.rho, grid.dx1)
    g2 = _d2(density.rho, grid.dx2)
    return density.time * float(np.max(np.hypot(g1, g2)))


def log_lipschitz_modulus(velocity: VelocityField, shifts: Sequence[int] = (1, 2, 4, 8)) -> float:
    """max |v(x) - v(x')| / (d |log d|) over grid pairs offset by the given cell counts."""
    grid = velocity.grid
    v = velocity.v
    best = 0.0
    for k in shifts:
        for axis, step in ((1, grid.dx1), (2, grid.dx2)):
            d = k * step
            if d >= 1.0:
                continue
            if axis == 1:
                diff = np.roll(v, -k, axis=1) - v
            else:
                diff = v[:, :, k:] - v[:, :, :-k]
            ratio = np.max(np.hypot(diff[0], diff[1])) / (d * abs(np.log(d)))
            best = max(best, float(ratio))
    return best


def velocity_decay(velocity: VelocityField) -> tuple[np.ndarray, np.ndarray]:
    """(x2 rows, sup over x1 of |v|) for every row."""
    speed = np.hypot(velocity.v[0], velocity.v[1])
    return velocity.grid.x2, np.max(speed, axis=0)


def decay_ratio(velocity: VelocityField, a: float) -> float:
    """sup |v| on the rows nearest |x2| = a + 1 over the rows nearest |x2| = a."""
    x2, sup = velocity_decay(velocity)

    def level(h: float) -> float:
        rows = [int(np.argmin(np.abs(x2 - h))), int(np.argmin(np.abs(x2 + h)))]
        return float(max(sup[rows]))

    inner = level(a)
    return level(a + 1.0) / inner if inner > 0.0 else 0.0


def mixing_zone_area(density: DensityField, tol: float = MIXING_TOL) -> float:
    """Area of {|rho| < 1 - tol}."""
    return density.grid.integrate((np.abs(density.rho) < 1.0 - tol).astype(float))


def mixing_width(density: DensityField) -> float:
    """x1-average of 2 int (1 - |rho|) dx2; equals 4 mu t for the flat profile."""
    per_column = 2.0 * density.grid.integrate_x2(1.0 - np.abs(density.rho))
    return float(np.mean(per_column))


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    time: float
    mass_error: float
    e_rel: float
    dissipation_lhs: float
    dissipation_rhs: float
    hull_violation_max: float
    entropy_residual: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = [self.mass_error, self.e_rel, self.dissipation_lhs, self.dissipation_rhs]
        values += list(self.entropy_residual.values())
        if not np.all(np.isfinite(values + [self.hull_violation_max])):
            raise ValueError(f"non-finite diagnostics at t={self.time}")
        # Reported as a violation; interior points (mu < 1) count as 0.
        self.hull_violation_max = max(0.0, self.hull_violation_max)

    def to_text(self) -> str:
        lines = [
            f"time: {self.time!r}",
            f"mass_error: {self.mass_error!r}",
            f"e_rel: {self.e_rel!r}",
            f"dissipation_lhs: {self.dissipation_lhs!r}",
            f"dissipation_rhs: {self.dissipation_rhs!r}",
            f"hull_violation_max: {self.hull_violation_max!r}",
        ]
        lines += [f"entropy_residual[{k}]: {v!r}" for k, v in self.entropy_residual.items()]
        return "\n".join(lines) + "\n"

    def row(self) -> list[str]:
        base = [
            self.time,
            self.mass_error,
            self.e_rel,
            self.dissipation_lhs,
            self.dissipation_rhs,
            self.hull_violation_max,
        ]
        return [repr(float(x)) for x in base + list(self.entropy_residual.values())]


def build_records(
    densities: Sequence[DensityField],
    velocities: Sequence[VelocityField],
    fluxes: Sequence[FluxField],
    rho0: InitialDensity,
    entropies: Sequence[Entropy] = DEFAULT_ENTROPIES,
) -> list[DiagnosticsRecord]:
    lhs, rhs = dissipation_identity(densities, fluxes, rho0)
    residuals = {e.name: entropy_residual(densities, velocities, e) for e in entropies}
    records = []
    for i, (d, v, m) in enumerate(zip(densities, velocities, fluxes)):
        records.append(
            DiagnosticsRecord(
                time=d.time,
                mass_error=mass_error(d, rho0),
                e_rel=relative_potential_energy(d, rho0),
                dissipation_lhs=float(lhs[i]),
                dissipation_rhs=float(rhs[i]),
                hull_violation_max=hull_check(d, v, m),
                entropy_residual={name: float(r[i]) for name, r in residuals.items()},
            )
        )
    return records


def write_records(records: Sequence[DiagnosticsRecord], out_dir: Path) -> tuple[Path, Path]:
    """diagnostics.txt (one block per node) and diagnostics.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = out_dir / "diagnostics.txt"
    text.write_text("\n".join(r.to_text() for r in records))
    table = out_dir / "diagnostics.csv"
    names = list(records[0].entropy_residual) if records else []
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "time",
                "mass_error",
                "e_rel",
                "dissipation_lhs",
                "dissipation_rhs",
                "hull_violation_max",
            ]
            + [f"entropy[{n}]" for n in names]
        )
        for r in records:
            writer.writerow(r.row())
    return text, table
