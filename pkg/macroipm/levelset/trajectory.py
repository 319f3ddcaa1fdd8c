"""
EtaTrajectory and its checkpoint format.

Times are solver times: with the mobility mu < 1 the solver runs in the
rescaled time tau = mu * t (see AnsatzField). The trajectory stores eta on the
physical grid; between nodes the weighted field t^(1+alpha) * eta is
interpolated linearly.

Checkpoint layout (plain text, floats with repr):

    # eta checkpoint
    config_hash: sha256:...
    alpha: 0.5
    ...
    times: 0.0 0.001 ...
    [node 3]
    k j re im
    0 0 0.0012 0.0
    ...
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .grid import SolverGrid

__all__ = ["EtaTrajectory", "write_checkpoint", "read_checkpoint"]


@dataclass(frozen=True, eq=False)
class EtaTrajectory:
    """Correction field eta on a time grid with eta(t_0 = 0) = 0."""

    grid: SolverGrid
    alpha: float
    times: np.ndarray
    values: np.ndarray
    mu: float = 1.0
    converged: bool = False

    def __post_init__(self) -> None:
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0.0):
            raise ValueError("time grid must start at 0 and increase strictly")
        if self.values.shape != (len(self.times), self.grid.n_phys, self.grid.n2):
            raise ValueError(f"values shape {self.values.shape} does not match grid and times")

    @classmethod
    def zeros(cls, grid: SolverGrid, times: np.ndarray, alpha: float, mu: float = 1.0):
        values = np.zeros((len(times), grid.n_phys, grid.n2))
        return cls(grid, alpha, np.asarray(times, dtype=float), values, mu, converged=True)

    @classmethod
    def from_weighted(
        cls,
        grid: SolverGrid,
        times: np.ndarray,
        weighted: np.ndarray,
        alpha: float,
        mu: float = 1.0,
        converged: bool = False,
    ) -> EtaTrajectory:
        """Build from g = t^(1+alpha) * eta."""
        eta = np.zeros_like(weighted)
        scale = times[1:] ** (1.0 + alpha)
        eta[1:] = weighted[1:] / scale[:, None, None]
        return cls(grid, alpha, np.asarray(times, dtype=float), eta, mu, converged)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def weighted(self) -> np.ndarray:
        scale = self.times ** (1.0 + self.alpha)
        return self.values * scale[:, None, None]

    def weighted_at(self, t: float) -> np.ndarray:
        """t^(1+alpha) eta(t), linear in t between stored nodes."""
        if t < 0.0 or t > self.horizon * (1.0 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        g = self.weighted()
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * g[i] + w * g[i + 1]

    def eta_at(self, t: float) -> np.ndarray:
        if t == 0.0:
            return self.grid.zeros()
        return self.weighted_at(t) / t ** (1.0 + self.alpha)

    def with_converged(self, converged: bool) -> EtaTrajectory:
        return replace(self, converged=converged)


def write_checkpoint(
    trajectory: EtaTrajectory, path: Path, config_hash: str | None = None
) -> Path:
    """Dump y1 Fourier coefficients (k = 0..n_modes) x y2 nodes per time node."""
    grid = trajectory.grid
    lines = [
        "# eta checkpoint",
        f"config_hash: {config_hash or ''}",
        f"alpha: {trajectory.alpha!r}",
        f"mu: {trajectory.mu!r}",
        f"converged: {str(trajectory.converged).lower()}",
        f"n_modes: {grid.n_modes}",
        f"n_phys: {grid.n_phys}",
        f"n2: {grid.n2}",
        f"half_width: {grid.half_width!r}",
        "times: " + " ".join(repr(float(t)) for t in trajectory.times),
    ]
    for node, eta in enumerate(trajectory.values):
        lines.append(f"[node {node}]")
        lines.append("k j re im")
        coeffs = grid.coefficients(eta)
        for k in range(grid.n_modes + 1):
            for j in range(grid.n2):
                c = coeffs[k, j]
                lines.append(f"{k} {j} {float(c.real)!r} {float(c.imag)!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_checkpoint(path: Path) -> tuple[EtaTrajectory, dict[str, Any]]:
    """Inverse of write_checkpoint. Returns the trajectory and the header fields."""
    header: dict[str, Any] = {}
    blocks: list[np.ndarray] = []
    current: np.ndarray | None = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line == "k j re im":
            continue
        if line.startswith("[node"):
            current = np.zeros((int(header["n_modes"]) + 1, int(header["n2"])), dtype=complex)
            blocks.append(current)
            continue
        if current is None:
            key, _, value = line.partition(":")
            header[key.strip()] = value.strip()
            continue
        k, j, re, im = line.split()
        current[int(k), int(j)] = complex(float(re), float(im))

    grid = SolverGrid(
        n_modes=int(header["n_modes"]),
        n_phys=int(header["n_phys"]),
        n2=int(header["n2"]),
        half_width=float(header["half_width"]),
    )
    times = np.array([float(t) for t in header["times"].split()])
    values = np.stack([grid.from_coefficients(c) for c in blocks])
    values[0] = 0.0
    trajectory = EtaTrajectory(
        grid=grid,
        alpha=float(header["alpha"]),
        times=times,
        values=values,
        mu=float(header["mu"]),
        converged=header["converged"] == "true",
    )
    return trajectory, header
