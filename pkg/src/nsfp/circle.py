"""Operators and model data on the orientation circle.

The microscopic configuration space is the circle of rod directions in
the plane, discretized by nm equispaced nodes theta_b = 2*pi*b/nm with
trapezoidal quadrature weight 2*pi/nm.  All operators act on the last
axis of the input array, so a full distribution cube (nx, nx, nm) and a
single slice (nm,) are handled by the same code.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class CircleGrid:
    """Equispaced grid on the circle with nm nodes."""

    nm: int

    def __post_init__(self):
        if self.nm < 8 or self.nm % 2 != 0:
            raise ValueError(f"nm must be even and >= 8, got {self.nm}")

    @property
    def weight(self) -> float:
        return 2.0 * np.pi / self.nm

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.nm) * self.weight


@lru_cache(maxsize=None)
def _circle_modes(nm: int):
    n = np.fft.rfftfreq(nm, d=1.0 / nm)  # 0, 1, ..., nm/2
    n_odd = n.copy()
    n_odd[-1] = 0.0  # unmatched Nyquist mode dropped in odd symbols
    n.setflags(write=False)
    n_odd.setflags(write=False)
    return n, n_odd


def grad_theta(values: np.ndarray) -> np.ndarray:
    """Spectral d/dtheta along the last axis."""
    nm = values.shape[-1]
    _, n_odd = _circle_modes(nm)
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * (1j * n_odd), n=nm, axis=-1)


def laplace_theta(values: np.ndarray) -> np.ndarray:
    """Spectral d^2/dtheta^2 along the last axis."""
    nm = values.shape[-1]
    n, _ = _circle_modes(nm)
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * (-(n ** 2)), n=nm, axis=-1)


def smooth_R(values: np.ndarray, alpha: float) -> np.ndarray:
    """Negative-order smoothing (1 - d^2/dtheta^2)^(-alpha/2) on circle modes."""
    if alpha <= 1.5:
        raise ValueError("smoothing order alpha must exceed 3/2")
    nm = values.shape[-1]
    n, _ = _circle_modes(nm)
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * (1.0 + n ** 2) ** (-alpha / 2), n=nm, axis=-1)


def smooth_R_inverse(values: np.ndarray, alpha: float) -> np.ndarray:
    """Inverse of smooth_R; grows like n^alpha, only safe on band-limited data."""
    nm = values.shape[-1]
    n, _ = _circle_modes(nm)
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * (1.0 + n ** 2) ** (alpha / 2), n=nm, axis=-1)


def circle_integrate(values: np.ndarray) -> np.ndarray:
    """Trapezoidal integral over theta (exact for band-limited integrands)."""
    nm = values.shape[-1]
    return values.sum(axis=-1) * (2.0 * np.pi / nm)


@lru_cache(maxsize=None)
def _theta_dealias_mask(nm: int, fraction: float = 2.0 / 3.0):
    n, _ = _circle_modes(nm)
    mask = (n <= fraction * nm / 2).astype(float)
    mask.setflags(write=False)
    return mask


def theta_dealias(values: np.ndarray) -> np.ndarray:
    """2/3-rule truncation of circle modes, for use after products."""
    nm = values.shape[-1]
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * _theta_dealias_mask(nm), n=nm, axis=-1)


@dataclass(frozen=True)
class InteractionKernel:
    """Symmetric orientation interaction kernel k(theta - theta').

    The default form is the nematic alignment kernel -b*cos(2*(theta -
    theta')); a custom even kernel may be supplied as cosine coefficients
    (cos_coeffs[m] multiplies cos(m*dtheta)).
    """

    b: float = 0.5
    cos_coeffs: Optional[tuple] = None

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("coupling strength b must be nonnegative")

    def samples(self, nm: int) -> np.ndarray:
        theta = np.arange(nm) * (2.0 * np.pi / nm)
        if self.cos_coeffs is None:
            return -self.b * np.cos(2.0 * theta)
        out = np.zeros(nm)
        for m, a in enumerate(self.cos_coeffs):
            out += a * np.cos(m * theta)
        return out

    def lipschitz_constant(self) -> float:
        if self.cos_coeffs is None:
            return 2.0 * self.b
        return float(sum(m * abs(a) for m, a in enumerate(self.cos_coeffs)))

    def grad_samples(self, nm: int) -> np.ndarray:
        return grad_theta(self.samples(nm))


def potential_U(values: np.ndarray, kernel: InteractionKernel) -> np.ndarray:
    """Mean-field potential: circular convolution of the kernel with f.

    Trapezoidal quadrature of int k(theta - theta') f(theta') dtheta',
    evaluated as a single FFT product on the last axis.
    """
    nm = values.shape[-1]
    khat = np.fft.rfft(kernel.samples(nm))
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * khat, n=nm, axis=-1) * (2.0 * np.pi / nm)


class RodCoefficients:
    """Drift coefficients c_{ji}(theta) and their theta-derivatives.

    Stored as arrays c[a, b] = c_{(a+1)(b+1)} of shape (2, 2, nm).  The
    default rod model is c_{ji} = m_j m-perp_i with m = (cos, sin).
    """

    __slots__ = ("c", "dc")

    def __init__(self, c: np.ndarray, dc: np.ndarray):
        self.c = np.asarray(c, dtype=float)
        self.dc = np.asarray(dc, dtype=float)
        if self.c.shape != self.dc.shape or self.c.ndim != 3 or self.c.shape[:2] != (2, 2):
            raise ValueError("coefficient arrays must have shape (2, 2, nm)")

    @property
    def nm(self) -> int:
        return self.c.shape[-1]

    @property
    def sup_c(self) -> float:
        return float(np.abs(self.c).max())

    @property
    def sup_dc(self) -> float:
        return float(np.abs(self.dc).max())

    @classmethod
    def rod_model(cls, grid: CircleGrid) -> "RodCoefficients":
        th = grid.nodes
        ct, st = np.cos(th), np.sin(th)
        c = np.empty((2, 2, grid.nm))
        dc = np.empty((2, 2, grid.nm))
        c[0, 0] = -ct * st          # c_11 = -sin(2t)/2
        c[0, 1] = ct * ct           # c_12 = cos^2
        c[1, 0] = -st * st          # c_21 = -sin^2
        c[1, 1] = st * ct           # c_22 = sin(2t)/2
        dc[0, 0] = -np.cos(2 * th)
        dc[0, 1] = -np.sin(2 * th)
        dc[1, 0] = -np.sin(2 * th)
        dc[1, 1] = np.cos(2 * th)
        return cls(c, dc)

    @classmethod
    def zero(cls, grid: CircleGrid) -> "RodCoefficients":
        z = np.zeros((2, 2, grid.nm))
        return cls(z, z.copy())

    @classmethod
    def from_fourier(cls, grid: CircleGrid,
                     cos_coeffs: Sequence[Sequence[Sequence[float]]],
                     sin_coeffs: Sequence[Sequence[Sequence[float]]]) -> "RodCoefficients":
        """Build each entry from cosine/sine coefficient lists.

        cos_coeffs[j][i] and sin_coeffs[j][i] are sequences indexed by the
        harmonic; derivatives of a trigonometric polynomial are exact.
        """
        th = grid.nodes
        c = np.zeros((2, 2, grid.nm))
        dc = np.zeros((2, 2, grid.nm))
        for a in (0, 1):
            for bb in (0, 1):
                for m, coef in enumerate(cos_coeffs[a][bb]):
                    c[a, bb] += coef * np.cos(m * th)
                    dc[a, bb] += -coef * m * np.sin(m * th)
                for m, coef in enumerate(sin_coeffs[a][bb]):
                    c[a, bb] += coef * np.sin(m * th)
                    dc[a, bb] += coef * m * np.cos(m * th)
        return cls(c, dc)


def rod_coefficients(grid: CircleGrid) -> RodCoefficients:
    """Default rod-suspension drift coefficients."""
    return RodCoefficients.rod_model(grid)
