"""
Eulerian fields from the level-set solution.

Inside the mixing zone the density is read off the inverse transform,
rho(t, X(y)) = y2 / 2, with X(y) = (y1, tau y2 + f(tau, y)) and tau = mu t.
The velocity is the Biot-Savart integral over the solver grid,

    v(t, x) = 1/2 int K(x - X(z)) d_y1 f(tau, z) dz,

and the flux is m = rho v - mu (1 - rho^2) e2.

Usage:
    grid = EulerianGrid(n_x1=256, n_x2=256, half_height=4.0)
    rho = density_field(ansatz, 0.05, grid)
    v = velocity_field(ansatz, 0.05, grid, workers=4)
    m = flux_field(rho, v)
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import IntEnum
from functools import cached_property
from typing import Any, ClassVar, Literal

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline

from .errors import MonotonicityError
from .kernel import FOUR_PI, strip_denominator
from .levelset.ansatz import AnsatzField

logger = logging.getLogger(__name__)

__all__ = [
    "EulerianGrid",
    "DensityField",
    "VelocityField",
    "FluxField",
    "LevelCurves",
    "Exterior",
    "Inversion",
    "invert_transform",
    "invert_point",
    "density_at",
    "density_field",
    "velocity_at",
    "velocity_field",
    "flux_m",
    "flux_field",
    "level_curves",
]

INVERSION_TOL = 1e-12
NEWTON_STEPS = 2
COINCIDENT_NODE = 1e-20  # strip denominator below which a quadrature node is dropped

Centering = Literal["nodes", "cells"]


# ---------------------------------------------------------------------------
# Grid and field containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EulerianGrid:
    """Periodic strip T x [-L, L].

    'nodes' places x2 on linspace(-L, L, n_x2 + 1) and integrates with
    Simpson's rule; 'cells' places x2 on the n_x2 cell centres (finite volume).
    x1 is always periodic with spacing 2 pi / n_x1.
    """

    n_x1: int
    n_x2: int
    half_height: float
    centering: Centering = "nodes"

    def __post_init__(self) -> None:
        if self.centering not in ("nodes", "cells"):
            raise ValueError(f"unknown centering {self.centering!r}")
        if self.centering == "nodes" and self.n_x2 % 2:
            raise ValueError("node grids need an even n_x2 for Simpson's rule")

    @property
    def dx1(self) -> float:
        return 2.0 * np.pi / self.n_x1

    @property
    def dx2(self) -> float:
        return 2.0 * self.half_height / self.n_x2

    @cached_property
    def x1(self) -> np.ndarray:
        offset = 0.5 if self.centering == "cells" else 0.0
        return self.dx1 * (np.arange(self.n_x1) + offset)

    @cached_property
    def x2(self) -> np.ndarray:
        if self.centering == "cells":
            return -self.half_height + self.dx2 * (np.arange(self.n_x2) + 0.5)
        return np.linspace(-self.half_height, self.half_height, self.n_x2 + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x1, len(self.x2))

    @cached_property
    def x2_weights(self) -> np.ndarray:
        if self.centering == "cells":
            return np.full(self.n_x2, self.dx2)
        w = np.ones(self.n_x2 + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * self.dx2 / 3.0

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def integrate(self, values: np.ndarray) -> float:
        """Periodic rectangle rule in x1 times the x2 rule."""
        return float(self.dx1 * np.sum(np.asarray(values) @ self.x2_weights))

    def integrate_x2(self, values: np.ndarray) -> np.ndarray:
        """Integral along x2 for every x1 column."""
        return np.asarray(values) @ self.x2_weights

    def metadata(self) -> dict[str, Any]:
        return {
            "grid": self.centering,
            "n_x1": self.n_x1,
            "n_x2": self.n_x2,
            "half_height": self.half_height,
        }

    @classmethod
    def from_metadata(cls, meta: dict[str, Any]) -> EulerianGrid:
        return cls(
            n_x1=int(meta["n_x1"]),
            n_x2=int(meta["n_x2"]),
            half_height=float(meta["half_height"]),
            centering=meta.get("grid", "nodes"),
        )


class _Field:
    """Shared metadata and component access for exported fields."""

    KIND: ClassVar[str]
    COLUMNS: ClassVar[tuple[str, ...]]

    grid: EulerianGrid
    time: float
    mu: float
    config_hash: str | None

    def components(self) -> tuple[np.ndarray, ...]:
        raise NotImplementedError

    def metadata(self) -> dict[str, Any]:
        meta: dict[str, Any] = {"kind": self.KIND, "time": self.time, "mu": self.mu}
        meta.update(self.grid.metadata())
        meta["config_hash"] = self.config_hash or ""
        return meta

    def with_hash(self, config_hash: str):
        return replace(self, config_hash=config_hash)  # type: ignore[type-var]


@dataclass(frozen=True, eq=False)
class DensityField(_Field):
    KIND: ClassVar[str] = "density"
    COLUMNS: ClassVar[tuple[str, ...]] = ("rho",)

    grid: EulerianGrid
    time: float
    rho: np.ndarray
    mu: float = 1.0
    config_hash: str | None = None

    def components(self) -> tuple[np.ndarray, ...]:
        return (self.rho,)

    @classmethod
    def from_components(cls, grid, time, comps, **meta) -> DensityField:
        return cls(grid=grid, time=time, rho=comps[0], **meta)


@dataclass(frozen=True, eq=False)
class VelocityField(_Field):
    KIND: ClassVar[str] = "velocity"
    COLUMNS: ClassVar[tuple[str, ...]] = ("v1", "v2")

    grid: EulerianGrid
    time: float
    v: np.ndarray  # (2, n_x1, n_x2 points)
    mu: float = 1.0
    config_hash: str | None = None

    def components(self) -> tuple[np.ndarray, ...]:
        return (self.v[0], self.v[1])

    @classmethod
    def from_components(cls, grid, time, comps, **meta) -> VelocityField:
        return cls(grid=grid, time=time, v=np.stack(comps), **meta)


@dataclass(frozen=True, eq=False)
class FluxField(_Field):
    KIND: ClassVar[str] = "flux"
    COLUMNS: ClassVar[tuple[str, ...]] = ("m1", "m2")

    grid: EulerianGrid
    time: float
    m: np.ndarray
    mu: float = 1.0
    config_hash: str | None = None

    def components(self) -> tuple[np.ndarray, ...]:
        return (self.m[0], self.m[1])

    @classmethod
    def from_components(cls, grid, time, comps, **meta) -> FluxField:
        return cls(grid=grid, time=time, m=np.stack(comps), **meta)


FIELD_TYPES: dict[str, type] = {
    DensityField.KIND: DensityField,
    VelocityField.KIND: VelocityField,
    FluxField.KIND: FluxField,
}


@dataclass(frozen=True, eq=False)
class LevelCurves:
    """gamma_t(x1, h) sampled on x1 for each level h; gamma has shape (len(h), len(x1))."""

    time: float
    x1: np.ndarray
    h: np.ndarray
    gamma: np.ndarray
    config_hash: str | None = None


# ---------------------------------------------------------------------------
# Inverse transform
# ---------------------------------------------------------------------------


class Exterior(IntEnum):
    BELOW = -1
    ABOVE = 1


@dataclass(frozen=True, eq=False)
class Inversion:
    """y2 with NaN outside the mixing zone; region is -1 below, 0 inside, +1 above."""

    y2: np.ndarray
    region: np.ndarray


class _ColumnSplines:
    """Cubic splines of y2 -> tau y2 + f along each x1 column, evaluated per point."""

    def __init__(self, y2_nodes: np.ndarray, columns: np.ndarray) -> None:
        self.nodes = y2_nodes
        spline = CubicSpline(y2_nodes, columns, axis=1)
        self.c = spline.c  # (4, n2 - 1, m)
        self.col = np.arange(columns.shape[0])[:, None]

    def _locate(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.clip(np.searchsorted(self.nodes, y, side="right") - 1, 0, len(self.nodes) - 2)
        return idx, y - self.nodes[idx]

    def value(self, y: np.ndarray) -> np.ndarray:
        idx, dy = self._locate(y)
        c = self.c[:, idx, self.col]
        return ((c[0] * dy + c[1]) * dy + c[2]) * dy + c[3]

    def slope(self, y: np.ndarray) -> np.ndarray:
        idx, dy = self._locate(y)
        c = self.c[:, idx, self.col]
        return (3.0 * c[0] * dy + 2.0 * c[1]) * dy + c[2]


def _invert_columns(y2_nodes: np.ndarray, columns: np.ndarray, x2: np.ndarray) -> Inversion:
    """Solve tau y2 + f(y2) = x2 column by column; x2 has shape (m, q)."""
    if np.any(np.diff(columns, axis=1) <= 0.0):
        raise MonotonicityError("level-set map not strictly increasing along y2")
    region = np.zeros(x2.shape, dtype=np.int8)
    region[x2 > columns[:, -1:]] = Exterior.ABOVE
    region[x2 < columns[:, :1]] = Exterior.BELOW
    if x2.size == 0:
        return Inversion(y2=np.zeros(x2.shape), region=region)

    splines = _ColumnSplines(y2_nodes, columns)
    lo = np.full(x2.shape, y2_nodes[0])
    hi = np.full(x2.shape, y2_nodes[-1])
    while np.max(hi - lo) > INVERSION_TOL:
        mid = 0.5 * (lo + hi)
        below = splines.value(mid) < x2
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    y = 0.5 * (lo + hi)
    for _ in range(NEWTON_STEPS):
        slope = splines.slope(y)
        safe = np.where(slope > 0.0, slope, 1.0)
        step = np.where(slope > 0.0, (splines.value(y) - x2) / safe, 0.0)
        y = np.clip(y - step, y2_nodes[0], y2_nodes[-1])
    y[region != 0] = np.nan
    return Inversion(y2=y, region=region)


def _require_positive(t: float) -> None:
    if not t > 0.0:
        raise ValueError(f"reconstruction needs t > 0, got {t}")


def invert_transform(field: AnsatzField, t: float, x1: ArrayLike, x2: ArrayLike) -> Inversion:
    """
    Invert x2 = tau y2 + f(tau, x1, y2) for every pair (x1[i], x2[i, ...]).

    x1 has shape (m,); x2 has shape (m,) or (m, q).

    Raises:
        MonotonicityError: if some column is not strictly increasing.
    """
    _require_positive(t)
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.asarray(x2, dtype=float)
    flat = x2.ndim <= 1
    x2 = np.atleast_1d(x2).reshape(len(x1), -1)
    columns = field.columns(t, x1)
    result = _invert_columns(field.grid.y2, columns, x2)
    if flat:
        return Inversion(y2=result.y2[:, 0], region=result.region[:, 0])
    return result


def invert_point(field: AnsatzField, t: float, x1: float, x2: float) -> float | Exterior:
    """Scalar inversion: y2 inside the mixing zone, otherwise the exterior tag."""
    result = invert_transform(field, t, [x1], [x2])
    region = int(result.region[0])
    return Exterior(region) if region else float(result.y2[0])


def _density_from(inv: Inversion, half_width: float) -> np.ndarray:
    return np.where(inv.region == 0, inv.y2 / half_width, inv.region.astype(float))


def density_at(field: AnsatzField, t: float, x: ArrayLike) -> np.ndarray | float:
    """rho at point(s) x of shape (2,) or (2, m)."""
    pts = np.asarray(x, dtype=float)
    inv = invert_transform(field, t, np.atleast_1d(pts[0]), np.atleast_1d(pts[1]))
    rho = _density_from(inv, field.grid.half_width)
    return float(rho[0]) if pts.ndim == 1 else rho


def density_field(field: AnsatzField, t: float, grid: EulerianGrid) -> DensityField:
    _require_positive(t)
    columns = field.columns(t, grid.x1)
    x2 = np.broadcast_to(grid.x2, grid.shape)
    inv = _invert_columns(field.grid.y2, columns, x2)
    rho = np.clip(_density_from(inv, field.grid.half_width), -1.0, 1.0)
    return DensityField(grid=grid, time=t, rho=rho, mu=field.mu)


# ---------------------------------------------------------------------------
# Velocity
# ---------------------------------------------------------------------------


def _sources(field: AnsatzField, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature nodes X(z) and weights 1/2 d_y1 f dz on the solver grid."""
    sl = field.slice(t)
    grid = field.grid
    z1, z2 = field.transform(t)
    weights = 0.5 * grid.h1 * sl.f1 * grid.y2_weights[None, :]
    return z1.ravel(), z2.ravel(), weights.ravel()


def _biot_savart(
    px1: np.ndarray, px2: np.ndarray, zx1: np.ndarray, zx2: np.ndarray, w: np.ndarray
) -> np.ndarray:
    dz1 = px1[:, None] - zx1[None, :]
    dz2 = px2[:, None] - zx2[None, :]
    d = strip_denominator(dz1, dz2)
    with np.errstate(divide="ignore"):
        inv = np.where(d > COINCIDENT_NODE, 1.0 / (FOUR_PI * d), 0.0)
    v1 = -(np.sinh(dz2) * inv) @ w
    v2 = (np.sin(dz1) * inv) @ w
    return np.stack([v1, v2])


def _velocity_points(
    field: AnsatzField,
    t: float,
    px1: np.ndarray,
    px2: np.ndarray,
    workers: int = 1,
    chunk: int = 512,
) -> np.ndarray:
    _require_positive(t)
    zx1, zx2, w = _sources(field, t)
    out = np.zeros((2, len(px1)))
    if not np.any(w):
        return out
    starts = range(0, len(px1), chunk)

    def run(start: int) -> None:
        sl = slice(start, start + chunk)
        out[:, sl] = _biot_savart(px1[sl], px2[sl], zx1, zx2, w)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for start in starts:
            run(start)
    return out


def velocity_at(field: AnsatzField, t: float, x: ArrayLike, workers: int = 1) -> np.ndarray:
    """Velocity at point(s) x of shape (2,) or (2, m); returns the same layout."""
    pts = np.asarray(x, dtype=float)
    px1 = np.atleast_1d(pts[0]).astype(float)
    px2 = np.atleast_1d(pts[1]).astype(float)
    v = _velocity_points(field, t, px1, px2, workers)
    return v[:, 0] if pts.ndim == 1 else v


def velocity_field(
    field: AnsatzField, t: float, grid: EulerianGrid, workers: int = 1
) -> VelocityField:
    X1, X2 = grid.mesh()
    v = _velocity_points(field, t, X1.ravel(), X2.ravel(), workers)
    logger.debug("velocity field at t=%.4g: max |v| = %.3e", t, float(np.max(np.abs(v))))
    return VelocityField(grid=grid, time=t, v=v.reshape((2,) + grid.shape), mu=field.mu)


# ---------------------------------------------------------------------------
# Flux and level curves
# ---------------------------------------------------------------------------


def flux_m(rho: ArrayLike, v: ArrayLike, mu: float = 1.0) -> np.ndarray:
    """m = rho v - mu (1 - rho^2) e2; v has a leading axis of length 2."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(rho) > 1.0 + 1e-12):
        raise ValueError(f"|rho| must be <= 1, got max {np.max(np.abs(rho)):.6g}")
    return np.stack([rho * v[0], rho * v[1] - mu * (1.0 - rho**2)])


def flux_field(
    density: DensityField, velocity: VelocityField, mu: float | None = None
) -> FluxField:
    if density.grid != velocity.grid:
        raise ValueError("density and velocity must share a grid")
    mu = density.mu if mu is None else mu
    m = flux_m(density.rho, velocity.v, mu)
    return FluxField(grid=density.grid, time=density.time, m=m, mu=mu)


def level_curves(
    field: AnsatzField, t: float, h: ArrayLike, x1: ArrayLike | None = None
) -> LevelCurves:
    """gamma_t(x1, h) = 2 h tau + f(tau, x1, 2h) for h in [-1, 1]."""
    levels = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(np.abs(levels) > 1.0):
        raise ValueError("levels must lie in [-1, 1]")
    if x1 is None:
        x1 = field.grid.y1
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    tau = field.solver_time(t)
    f = field.f_at(t, x1)
    y2 = levels * field.grid.half_width
    f_levels = CubicSpline(field.grid.y2, f, axis=1)(y2)  # (len(x1), len(h))
    gamma = tau * y2[:, None] + f_levels.T
    return LevelCurves(time=t, x1=x1, h=levels, gamma=gamma)
