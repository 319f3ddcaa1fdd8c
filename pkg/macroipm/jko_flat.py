"""
Minimizing movements for the flat interface in one dimension.

Each step minimizes

    J(theta) = 1/2 W2^2(theta_k, theta) + 1/2 W2^2(1 - theta_k, 1 - theta) - h * sum(theta * y * dy)

over cell averages 0 <= theta <= 1 with fixed mass. Densities are piecewise
constant, so quantile functions are piecewise linear and both the distance
and its gradient are computed exactly on merged breakpoints.

With theta = (1 - rho)/2 and time doubled, the iterates approach the Burgers
rarefaction clamp((1 - y/t)/2, 0, 1), the flat macroscopic IPM profile.

On a grid with dy > 3h a sharp step is an exact discrete minimizer: spreading
a layer of mass eps over the next cell costs about eps * dy^2 / 3 in transport,
more than the h * eps * dy it gains in potential energy. run_jko therefore steps on a
transport grid refined until its spacing is at most h and stores the cell
averages on the grid it was given.

Usage:
    theta0 = Theta1D.step(n_cells=128, half_width=3.0)
    traj = run_jko(theta0, h=0.01, n_steps=50)
    gap = l1_gap(traj.final, burgers_cell_average(traj.times[-1], theta0.edges))
"""

from __future__ import annotations

import csv
import logging
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq

from .errors import ConvergenceWarning, MassMismatchError, MonotonicityWarning
from .run_config import JKOConfig

logger = logging.getLogger(__name__)

__all__ = [
    "Theta1D",
    "QuantileFunction",
    "JKOStepReport",
    "JKOTrajectory",
    "w2_distance_1d",
    "project_mass",
    "jko_objective",
    "jko_gradient",
    "jko_step",
    "transport_refinement",
    "run_jko",
    "burgers_exact",
    "burgers_cell_average",
    "l1_gap",
    "theta_from_rho",
    "rho_from_theta",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_reports_csv",
]

MASS_TOL = 1e-10
EL_TOL_FACTOR = 1e-4
DECREASE_TOL = 1e-10
INTERIOR_TOL = 1e-8
MONOTONE_TOL = 1e-8
MAX_HALVINGS = 60
PROJECTION_XTOL = 1e-15


@dataclass(frozen=True, eq=False)
class Theta1D:
    """Cell averages of the saturation on [-half_width, half_width]."""

    values: np.ndarray
    half_width: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("theta must be a 1-D array with at least two cells")
        if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise ValueError(f"theta out of [0, 1]: range [{v.min():.3g}, {v.max():.3g}]")
        object.__setattr__(self, "values", np.clip(v, 0.0, 1.0))

    @classmethod
    def step(cls, n_cells: int, half_width: float) -> Theta1D:
        """Heavy phase below y = 0: theta = 1 for y < 0, 0 above."""
        if n_cells % 2:
            raise ValueError("n_cells must be even")
        v = np.zeros(n_cells)
        v[: n_cells // 2] = 1.0
        return cls(v, half_width)

    @classmethod
    def zeros(cls, n_cells: int, half_width: float) -> Theta1D:
        return cls(np.zeros(n_cells), half_width)

    @classmethod
    def indicator(
        cls, n_cells: int, half_width: float, lo: float, hi: float, density: float = 1.0
    ) -> Theta1D:
        """`density` on cells whose centre lies in [lo, hi]."""
        t = cls(np.zeros(n_cells), half_width)
        inside = (t.centres > lo) & (t.centres < hi)
        return cls(np.where(inside, density, 0.0), half_width)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dy(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n + 1)

    @property
    def centres(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.dy)

    def complement(self) -> Theta1D:
        return Theta1D(1.0 - self.values, self.half_width)

    def with_values(self, values: np.ndarray) -> Theta1D:
        return Theta1D(values, self.half_width)

    def is_monotone(self, tol: float = MONOTONE_TOL) -> bool:
        """Non-increasing in y."""
        return bool(np.all(np.diff(self.values) <= tol))

    def refine(self, factor: int) -> Theta1D:
        """Split every cell into `factor` cells with the same value."""
        if factor < 1:
            raise ValueError(f"refinement factor must be >= 1, got {factor}")
        return Theta1D(np.repeat(self.values, factor), self.half_width)

    def coarsen(self, factor: int) -> Theta1D:
        """Average groups of `factor` consecutive cells."""
        if factor < 1 or self.n % factor:
            raise ValueError(f"cannot coarsen {self.n} cells by {factor}")
        return Theta1D(self.values.reshape(-1, factor).mean(axis=1), self.half_width)


def transport_refinement(dy: float, h: float) -> int:
    """Smallest factor with dy / factor <= h; 1 for h = 0."""
    if h <= 0.0:
        return 1
    return max(1, int(np.ceil(dy / h - 1e-9)))


class QuantileFunction:
    """
    Generalized inverse of the cumulative mass of a piecewise-constant density.

    Q(s) for s in (0, m] lives in the first cell whose cumulative mass reaches
    s; Q(0) is the left edge of the first non-empty cell.
    """

    def __init__(self, edges: np.ndarray, values: np.ndarray) -> None:
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(values, dtype=float)
        dy = np.diff(self.edges)
        self.cum = np.concatenate([[0.0], np.cumsum(self.values * dy)])
        self.mass = float(self.cum[-1])
        positive = np.flatnonzero(self.values > 0)
        if positive.size == 0:
            raise ValueError("quantile function of a zero density")
        self.first = int(positive[0])

    @classmethod
    def of(cls, theta: Theta1D) -> QuantileFunction:
        return cls(theta.edges, theta.values)

    def cdf(self, y: ArrayLike) -> np.ndarray:
        return np.interp(y, self.edges, self.cum)

    def cell(self, s: ArrayLike) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.mass)
        j = np.searchsorted(self.cum[1:], s, side="left")
        j = np.where(s <= 0.0, self.first, j)
        return np.clip(j, 0, self.values.size - 1)

    def linear(self, s: ArrayLike, j: np.ndarray) -> np.ndarray:
        """The affine branch of cell j evaluated at s, clamped to the cell."""
        s = np.asarray(s, dtype=float)
        q = self.edges[j] + (s - self.cum[j]) / self.values[j]
        return np.clip(q, self.edges[j], self.edges[j + 1])

    def __call__(self, s: ArrayLike) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.mass)
        return self.linear(s, self.cell(s))


def _w2_squared(qa: QuantileFunction, qb: QuantileFunction) -> float:
    m = min(qa.mass, qb.mass)
    s = np.unique(np.concatenate([qa.cum, qb.cum, [m]]))
    s = s[(s >= 0.0) & (s <= m)]
    if s.size < 2:
        return 0.0
    sl, sr = s[:-1], s[1:]
    mid = 0.5 * (sl + sr)
    ja, jb = qa.cell(mid), qb.cell(mid)
    d_left = qa.linear(sl, ja) - qb.linear(sl, jb)
    d_right = qa.linear(sr, ja) - qb.linear(sr, jb)
    # the squared difference is quadratic on each piece
    return float(np.sum((sr - sl) * (d_left**2 + d_left * d_right + d_right**2) / 3.0))


def w2_distance_1d(theta_a: Theta1D, theta_b: Theta1D) -> float:
    """
    Squared quadratic Wasserstein distance between two equal-mass densities.

    Integral over s in [0, m] of |Qa(s) - Qb(s)|^2, exact for piecewise-constant
    densities. Raises MassMismatchError when the masses differ by more than 1e-10.
    """
    ma, mb = theta_a.mass, theta_b.mass
    if abs(ma - mb) > MASS_TOL:
        raise MassMismatchError(f"masses differ: {ma!r} vs {mb!r}")
    if min(ma, mb) <= 0.0:
        return 0.0
    return _w2_squared(QuantileFunction.of(theta_a), QuantileFunction.of(theta_b))


def _potential_integrals(
    edges: np.ndarray, values: np.ndarray, target: QuantileFunction
) -> np.ndarray:
    """
    Per-cell integrals of the Kantorovich potential a with a(-L) = 0 and
    a'(y) = y - Q_target(F(y)), F the cumulative mass of `values`.

    Between merged breakpoints F and Q_target are affine, so a is quadratic
    and Simpson's rule is exact on every piece.
    """
    n = values.size
    current = QuantileFunction(edges, values)
    inner = target.cum[1:-1]
    inner = inner[(inner > 0.0) & (inner < current.mass)]
    y = np.unique(np.concatenate([edges, current(inner)]))
    yl, yr = y[:-1], y[1:]
    keep = yr > yl
    yl, yr = yl[keep], yr[keep]
    ym = 0.5 * (yl + yr)

    i = np.clip(np.searchsorted(edges, ym, side="right") - 1, 0, n - 1)

    def F(pts: np.ndarray) -> np.ndarray:
        return current.cum[i] + values[i] * (pts - edges[i])

    sl, sm, sr = F(yl), F(ym), F(yr)
    j = target.cell(sm)
    dl = yl - target.linear(sl, j)
    dm = ym - target.linear(sm, j)
    dr = yr - target.linear(sr, j)

    width = yr - yl
    da = 0.5 * width * (dl + dr)
    a_left = np.concatenate([[0.0], np.cumsum(da)[:-1]])
    a_mid = a_left + 0.25 * width * (dl + dm)
    a_right = a_left + da
    piece = width * (a_left + 4.0 * a_mid + a_right) / 6.0
    return np.bincount(i, weights=piece, minlength=n)


@dataclass
class _Problem:
    """The fixed data of one step."""

    previous: Theta1D
    h: float
    q_prev: QuantileFunction
    q_prev_bar: QuantileFunction

    @classmethod
    def build(cls, previous: Theta1D, h: float) -> _Problem:
        return cls(
            previous=previous,
            h=h,
            q_prev=QuantileFunction.of(previous),
            q_prev_bar=QuantileFunction.of(previous.complement()),
        )

    def objective(self, values: np.ndarray) -> float:
        p = self.previous
        q = QuantileFunction(p.edges, values)
        q_bar = QuantileFunction(p.edges, 1.0 - values)
        energy = self.h * float(np.sum(values * p.centres) * p.dy)
        transport = _w2_squared(self.q_prev, q) + _w2_squared(self.q_prev_bar, q_bar)
        return 0.5 * transport - energy

    def gradient(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(g, a, a_bar): g_i integrates a - a_bar - h*y over cell i; a, a_bar are cell averages."""
        p = self.previous
        ga = _potential_integrals(p.edges, values, self.q_prev)
        gb = _potential_integrals(p.edges, 1.0 - values, self.q_prev_bar)
        g = ga - gb - self.h * p.centres * p.dy
        return g, ga / p.dy, gb / p.dy


def jko_objective(theta: Theta1D, previous: Theta1D, h: float) -> float:
    """The functional minimized by jko_step, for checks and brute-force comparison."""
    if abs(theta.mass - previous.mass) > MASS_TOL:
        raise MassMismatchError(f"masses differ: {theta.mass!r} vs {previous.mass!r}")
    return _Problem.build(previous, h).objective(theta.values)


def jko_gradient(theta: Theta1D, previous: Theta1D, h: float) -> np.ndarray:
    """Partial derivatives of jko_objective with respect to the cell values."""
    return _Problem.build(previous, h).gradient(theta.values)[0]


def project_mass(z: np.ndarray, mass: float, dy: float) -> np.ndarray:
    """
    Euclidean projection onto {0 <= theta <= 1, sum(theta) * dy = mass}.

    The projection is clip(z - lam, 0, 1); lam is the root of the piecewise
    linear mass defect.
    """
    z = np.asarray(z, dtype=float)
    capacity = z.size * dy
    if mass <= 0.0:
        return np.zeros_like(z)
    if mass >= capacity:
        return np.ones_like(z)

    def defect(lam: float) -> float:
        return float(np.clip(z - lam, 0.0, 1.0).sum() * dy - mass)

    lam = brentq(defect, float(z.min()) - 1.0, float(z.max()), xtol=PROJECTION_XTOL)
    return np.clip(z - lam, 0.0, 1.0)


def _el_residual(values: np.ndarray, r: np.ndarray) -> float:
    """
    Stationarity defect of the cell-averaged first variation r.

    At a minimizer r is a constant lam on cells strictly inside (0, 1), r >= lam
    on empty cells and r <= lam on full cells. Returns the spread over the
    interior or the worst sign violation on saturated cells, whichever is larger.
    """
    empty = values <= INTERIOR_TOL
    full = values >= 1.0 - INTERIOR_TOL
    interior = ~(empty | full)
    if interior.any():
        ri = r[interior]
        lam = float(ri.mean())
        spread = float(np.max(np.abs(ri - lam)))
        below = float(np.max(lam - r[empty], initial=0.0))
        above = float(np.max(r[full] - lam, initial=0.0))
        return max(spread, below, above)
    if empty.any() and full.any():
        return max(float(r[full].max() - r[empty].min()), 0.0)
    return 0.0


@dataclass
class JKOStepReport:
    """Outcome of one minimizing movement."""

    step: int
    h: float
    objective: float
    objective_start: float
    iterations: int
    el_residual: float
    converged: bool
    monotone: bool
    a: np.ndarray = field(repr=False)
    a_bar: np.ndarray = field(repr=False)
    history: list[float] = field(default_factory=list, repr=False)


def jko_step(
    previous: Theta1D,
    h: float,
    config: JKOConfig | None = None,
    *,
    step_index: int = 1,
) -> tuple[Theta1D, JKOStepReport]:
    """
    One minimizing movement from `previous` with step h.

    Projected gradient with Barzilai-Borwein step lengths, halved until the
    objective does not increase. Stops when the Euler-Lagrange residual is
    below 1e-4*h, when the decrease falls under 1e-10 with the residual within
    1e-3*h, or after config.max_inner iterations. In the last case the best
    iterate is returned with converged=False and a ConvergenceWarning.
    """
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    cfg = config or JKOConfig()
    m0 = previous.mass
    capacity = 2.0 * previous.half_width
    dy = previous.dy
    zero = np.zeros(previous.n)

    if h == 0.0 or m0 <= 0.0 or m0 >= capacity - 1e-14:
        # h = 0 leaves previous optimal; empty or full strips have one feasible point
        report = JKOStepReport(
            step=step_index,
            h=h,
            objective=-h * float(np.sum(previous.values * previous.centres) * dy),
            objective_start=-h * float(np.sum(previous.values * previous.centres) * dy),
            iterations=0,
            el_residual=0.0,
            converged=True,
            monotone=previous.is_monotone(),
            a=zero,
            a_bar=zero.copy(),
        )
        report.history.append(report.objective)
        return previous.with_values(previous.values.copy()), report

    problem = _Problem.build(previous, h)
    el_tol = EL_TOL_FACTOR * h

    theta = previous.values.copy()
    J = problem.objective(theta)
    g, a, a_bar = problem.gradient(theta)
    history = [J]
    residual = _el_residual(theta, g / dy)
    alpha = 1.0
    converged = residual <= el_tol
    iterations = 0

    while not converged and iterations < cfg.max_inner:
        iterations += 1
        for _ in range(MAX_HALVINGS):
            cand = project_mass(theta - alpha * g / dy, m0, dy)
            Jc = problem.objective(cand)
            if Jc <= J:
                break
            alpha *= 0.5
        else:
            logger.debug("step %d: no descent after %d halvings", step_index, MAX_HALVINGS)
            converged = residual <= 10.0 * el_tol
            break

        gc, a, a_bar = problem.gradient(cand)
        s = cand - theta
        yv = (gc - g) / dy
        sy = float(s @ yv)
        alpha = float(np.clip((s @ s) / sy, 1e-12, 1e12)) if sy > 0 else min(2.0 * alpha, 1e12)

        decrease = J - Jc
        theta, J, g = cand, Jc, gc
        history.append(J)
        residual = _el_residual(theta, g / dy)
        if residual <= el_tol or (decrease < DECREASE_TOL and residual <= 10.0 * el_tol):
            converged = True

    result = previous.with_values(theta)
    monotone = result.is_monotone()
    if not converged:
        msg = (
            f"step {step_index}: inner loop stopped after {iterations} iterations, "
            f"residual {residual:.3e}"
        )
        logger.warning(msg)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    if previous.is_monotone() and not monotone:
        warnings.warn(
            f"step {step_index}: iterate is not monotone in y", MonotonicityWarning, stacklevel=2
        )

    report = JKOStepReport(
        step=step_index,
        h=h,
        objective=J,
        objective_start=history[0],
        iterations=iterations,
        el_residual=residual,
        converged=converged,
        monotone=monotone,
        a=a,
        a_bar=a_bar,
        history=history,
    )
    logger.debug(
        "step %d: J=%.12g iterations=%d residual=%.3e", step_index, J, iterations, residual
    )
    return result, report


@dataclass
class JKOTrajectory:
    """Piecewise-constant-in-time interpolation: thetas[k] holds on [k h, (k+1) h).

    thetas live on the caller's grid; reports come from the transport grid,
    which has `refine` cells per stored cell.
    """

    h: float
    thetas: list[Theta1D]
    reports: list[JKOStepReport]
    refine: int = 1

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(len(self.thetas))

    @property
    def final(self) -> Theta1D:
        return self.thetas[-1]

    def at(self, t: float) -> Theta1D:
        k = int(np.floor(t / self.h + 1e-9)) if self.h > 0 else 0
        return self.thetas[min(k, len(self.thetas) - 1)]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)

    def l1_gaps(self) -> np.ndarray:
        """L1 distance to the Burgers cell averages at every stored time (t = 0 uses the step)."""
        return np.array(
            [
                l1_gap(th, burgers_cell_average(t, th.edges))
                for th, t in zip(self.thetas, self.times)
            ]
        )


def run_jko(
    theta0: Theta1D,
    h: float,
    n_steps: int,
    config: JKOConfig | None = None,
    on_step: Callable[[int, JKOStepReport], None] | None = None,
) -> JKOTrajectory:
    """
    Iterate jko_step n_steps times from theta0.

    The steps run on theta0 refined by config.refine, or by
    transport_refinement(theta0.dy, h) when that is unset, and every iterate is
    stored as cell averages on theta0's grid.
    """
    cfg = config or JKOConfig()
    factor = cfg.refine or transport_refinement(theta0.dy, h)
    fine = theta0.refine(factor)
    if factor > 1:
        logger.info("jko: transport grid of %d cells (dy=%.3g) for h=%g", fine.n, fine.dy, h)

    thetas = [theta0]
    reports: list[JKOStepReport] = []
    theta = theta0
    for k in range(1, n_steps + 1):
        fine, report = jko_step(fine, h, cfg, step_index=k)
        theta = fine.coarsen(factor)
        thetas.append(theta)
        reports.append(report)
        if on_step is not None:
            on_step(k, report)
    logger.info(
        "jko: %d steps of h=%g, mass drift %.2e, max residual %.2e",
        n_steps,
        h,
        abs(theta.mass - theta0.mass),
        max((r.el_residual for r in reports), default=0.0),
    )
    return JKOTrajectory(h=h, thetas=thetas, reports=reports, refine=factor)


# ---------------------------------------------------------------------------
# Burgers reference and the change of variables to the IPM density
# ---------------------------------------------------------------------------


def burgers_exact(t: float, y: ArrayLike) -> np.ndarray:
    """Rarefaction of d_t theta + d_y(theta(1 - theta)) = 0 from the step 1_{y<0}."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    return np.clip((1.0 - np.asarray(y, dtype=float) / t) / 2.0, 0.0, 1.0)


def _burgers_primitive(t: float, y: np.ndarray) -> np.ndarray:
    if t == 0:
        return np.minimum(y, 0.0)
    inside = -t + 0.5 * (y - y**2 / (2.0 * t) + 1.5 * t)
    return np.where(y <= -t, y, np.where(y >= t, 0.0, inside))


def burgers_cell_average(t: float, edges: ArrayLike) -> np.ndarray:
    """Exact cell averages of burgers_exact; t = 0 gives the step itself."""
    e = np.asarray(edges, dtype=float)
    P = _burgers_primitive(float(t), e)
    return np.diff(P) / np.diff(e)


def l1_gap(theta: Theta1D, reference: ArrayLike) -> float:
    return float(np.sum(np.abs(theta.values - np.asarray(reference))) * theta.dy)


def theta_from_rho(rho: ArrayLike) -> np.ndarray:
    """theta = (1 - rho)/2; IPM time t corresponds to 2t here."""
    return (1.0 - np.asarray(rho, dtype=float)) / 2.0


def rho_from_theta(theta: ArrayLike) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(theta, dtype=float)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

TRAJECTORY_HEADER = ("step", "time", "y", "theta")
REPORT_HEADER = ("step", "h", "objective", "iterations", "el_residual", "converged")


def write_trajectory_csv(traj: JKOTrajectory, path: Path, every: int = 1) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for k, (theta, t) in enumerate(zip(traj.thetas, traj.times)):
            if k % every and k != len(traj.thetas) - 1:
                continue
            for y, v in zip(theta.centres, theta.values):
                writer.writerow([k, repr(float(t)), repr(float(y)), repr(float(v))])
    return path


def read_trajectory_csv(path: Path, half_width: float) -> dict[int, Theta1D]:
    """Step index -> profile, for every step present in the file."""
    rows: dict[int, list[float]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(int(row["step"]), []).append(float(row["theta"]))
    return {k: Theta1D(np.array(v), half_width) for k, v in rows.items()}


def write_reports_csv(traj: JKOTrajectory, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in traj.reports:
            writer.writerow(
                [
                    r.step,
                    repr(r.h),
                    repr(r.objective),
                    r.iterations,
                    repr(r.el_residual),
                    str(r.converged).lower(),
                ]
            )
    return path
