"""Solver grid on Omega0 = T x [-2, 2]: Fourier/physical points in y1, uniform nodes in y2."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

__all__ = ["SolverGrid"]


@dataclass(frozen=True)
class SolverGrid:
    """Tensor grid for the level-set unknowns.

    Fields live in physical space with shape (n_phys, n2); axis 0 is y1 on
    2*pi*i/n_phys, axis 1 is y2 on linspace(-half_width, half_width, n2).
    Fields are band-limited to |k| <= n_modes in y1.
    """

    n_modes: int = 64
    n_phys: int = 256
    n2: int = 33
    half_width: float = 2.0

    def __post_init__(self) -> None:
        if self.n_modes >= self.n_phys // 2:
            raise ValueError(f"n_modes={self.n_modes} must be below n_phys/2={self.n_phys // 2}")
        if self.n2 < 5:
            raise ValueError("fourth-order differences in y2 need n2 >= 5")

    @cached_property
    def y1(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phys) / self.n_phys

    @cached_property
    def y2(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n2)

    @property
    def h1(self) -> float:
        return 2.0 * np.pi / self.n_phys

    @property
    def h2(self) -> float:
        return 2.0 * self.half_width / (self.n2 - 1)

    @cached_property
    def y2_weights(self) -> np.ndarray:
        """Trapezoid weights on the y2 nodes (sum = 2 * half_width)."""
        w = np.full(self.n2, self.h2)
        w[[0, -1]] *= 0.5
        return w

    @cached_property
    def _wavenumbers(self) -> np.ndarray:
        return np.fft.rfftfreq(self.n_phys, d=1.0 / self.n_phys)

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n_phys, self.n2))

    # -- y1: spectral ------------------------------------------------------

    def coefficients(self, field: np.ndarray) -> np.ndarray:
        """Fourier coefficients c_k, k = 0..n_modes, normalised by n_phys."""
        return np.fft.rfft(field, axis=0)[: self.n_modes + 1] / self.n_phys

    def from_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        full = np.zeros((self.n_phys // 2 + 1,) + coeffs.shape[1:], dtype=complex)
        full[: self.n_modes + 1] = coeffs * self.n_phys
        return np.fft.irfft(full, n=self.n_phys, axis=0)

    def project(self, field: np.ndarray) -> np.ndarray:
        """Drop y1 modes above n_modes."""
        return self.from_coefficients(self.coefficients(field))

    def d1(self, field: np.ndarray) -> np.ndarray:
        """Spectral y1 derivative of a band-limited field."""
        spectrum = np.fft.rfft(field, axis=0)
        k = self._wavenumbers.reshape((-1,) + (1,) * (field.ndim - 1))
        spectrum = spectrum * (1j * k)
        if self.n_phys % 2 == 0:
            spectrum[-1] = 0.0
        return np.fft.irfft(spectrum, n=self.n_phys, axis=0)

    def interpolate_y1(self, field: np.ndarray, x1: ArrayLike) -> np.ndarray:
        """Trigonometric interpolation of the band-limited field at arbitrary x1."""
        coeffs = self.coefficients(field)
        k = np.arange(self.n_modes + 1)
        weights = np.where(k == 0, 1.0, 2.0)
        phase = np.exp(1j * np.multiply.outer(np.asarray(x1, dtype=float), k))
        return ((phase * weights) @ coeffs).real

    # -- y2: fourth-order differences -------------------------------------

    def d2(self, field: np.ndarray) -> np.ndarray:
        """Fourth-order finite differences along y2, one-sided at the ends."""
        f = field
        out = np.empty_like(f)
        c = 1.0 / (12.0 * self.h2)
        out[:, 2:-2] = (f[:, :-4] - 8.0 * f[:, 1:-3] + 8.0 * f[:, 3:-1] - f[:, 4:]) * c
        out[:, 0] = (-25 * f[:, 0] + 48 * f[:, 1] - 36 * f[:, 2] + 16 * f[:, 3] - 3 * f[:, 4]) * c
        out[:, 1] = (-3 * f[:, 0] - 10 * f[:, 1] + 18 * f[:, 2] - 6 * f[:, 3] + f[:, 4]) * c
        out[:, -1] = (
            25 * f[:, -1] - 48 * f[:, -2] + 36 * f[:, -3] - 16 * f[:, -4] + 3 * f[:, -5]
        ) * c
        out[:, -2] = (3 * f[:, -1] + 10 * f[:, -2] - 18 * f[:, -3] + 6 * f[:, -4] - f[:, -5]) * c
        return out

    def unit_ball_norm(self, field: np.ndarray) -> float:
        """sup|eta| + sup|d1 eta| + sup|d2 eta| on the real slice."""
        return float(
            np.max(np.abs(field)) + np.max(np.abs(self.d1(field))) + np.max(np.abs(self.d2(field)))
        )
