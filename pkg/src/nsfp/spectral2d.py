"""Fourier spectral toolbox on the periodic square [0, 2*pi)^2.

Differentiation, Riesz transforms, inverse Laplacian, Leray projection,
heat propagation, mollification, sharp dyadic frequency blocks and the
norms built on them.  Fields are real samples on an nx-by-nx equispaced
grid; every operation is an exact Fourier-multiplier application on the
integer wavenumber lattice k in {-nx/2, ..., nx/2 - 1}^2.

Conventions: ``spectral`` denotes the raw (unnormalized) numpy ``fft2``
coefficients; the mathematical Fourier coefficient of mode k is
``spectral[k] / nx**2``.  All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import j0


@lru_cache(maxsize=None)
def _wavenumbers(nx: int):
    k = np.fft.fftfreq(nx, d=1.0 / nx)  # integer wavenumbers in fft order
    k1 = np.broadcast_to(k[:, None], (nx, nx)).copy()
    k2 = np.broadcast_to(k[None, :], (nx, nx)).copy()
    ksq = k1 * k1 + k2 * k2
    for a in (k1, k2, ksq):
        a.setflags(write=False)
    return k1, k2, ksq


@lru_cache(maxsize=None)
def _odd_wavenumbers(nx: int):
    # first-derivative wavenumbers: the unmatched Nyquist mode is zeroed so
    # that odd multipliers map real fields to real fields exactly
    k = np.fft.fftfreq(nx, d=1.0 / nx)
    k[nx // 2] = 0.0
    k1 = np.broadcast_to(k[:, None], (nx, nx)).copy()
    k2 = np.broadcast_to(k[None, :], (nx, nx)).copy()
    for a in (k1, k2):
        a.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=None)
def _dealias_mask(nx: int, fraction: float):
    k = np.fft.fftfreq(nx, d=1.0 / nx)
    keep = np.abs(k) <= fraction * nx / 2
    mask = keep[:, None] & keep[None, :]
    mask.setflags(write=False)
    return mask


@dataclass(frozen=True)
class GridSpec2D:
    """Equispaced periodic grid on [0, 2*pi)^2 with nx modes per axis."""

    nx: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.nx < 8 or self.nx % 2 != 0:
            raise ValueError(f"nx must be even and >= 8, got {self.nx}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.nx

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    @property
    def k1(self):
        return _wavenumbers(self.nx)[0]

    @property
    def k2(self):
        return _wavenumbers(self.nx)[1]

    @property
    def ksq(self):
        return _wavenumbers(self.nx)[2]

    @property
    def dealias_mask(self):
        return _dealias_mask(self.nx, self.dealias_fraction)

    def nodes(self):
        x = np.arange(self.nx) * self.spacing
        return np.meshgrid(x, x, indexing="ij")

    def max_shell(self) -> int:
        """Largest dyadic shell index carrying lattice modes."""
        kmax = np.sqrt(2.0) * self.nx / 2
        return int(np.ceil(np.log2(kmax)))


class ScalarField2D:
    """Real scalar on a GridSpec2D, with a lazily cached spectral view.

    Instances are treated as immutable: operations return new fields.
    """

    __slots__ = ("grid", "_values", "_spec")

    def __init__(self, grid: GridSpec2D, values=None, spectral=None):
        if values is None and spectral is None:
            raise ValueError("need physical values or spectral coefficients")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=float)
        self._spec = None if spectral is None else np.asarray(spectral, dtype=complex)
        shape = (grid.nx, grid.nx)
        if self._values is not None and self._values.shape != shape:
            raise ValueError(f"values shape {self._values.shape} != {shape}")
        if self._spec is not None and self._spec.shape != shape:
            raise ValueError(f"spectral shape {self._spec.shape} != {shape}")

    @classmethod
    def from_function(cls, grid: GridSpec2D, fn) -> "ScalarField2D":
        x1, x2 = grid.nodes()
        return cls(grid, values=np.asarray(fn(x1, x2), dtype=float))

    @classmethod
    def from_spectral(cls, grid: GridSpec2D, spec) -> "ScalarField2D":
        return cls(grid, spectral=spec)

    @classmethod
    def zeros(cls, grid: GridSpec2D) -> "ScalarField2D":
        return cls(grid, values=np.zeros((grid.nx, grid.nx)))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = np.fft.ifft2(self._spec).real
        return self._values

    @property
    def spectral(self) -> np.ndarray:
        if self._spec is None:
            self._spec = np.fft.fft2(self._values)
        return self._spec

    def mean(self) -> float:
        return float(self.values.mean())

    def dealias(self) -> "ScalarField2D":
        return ScalarField2D.from_spectral(self.grid, self.spectral * self.grid.dealias_mask)

    def __add__(self, other):
        if isinstance(other, ScalarField2D):
            return ScalarField2D(self.grid, values=self.values + other.values)
        return ScalarField2D(self.grid, values=self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField2D):
            return ScalarField2D(self.grid, values=self.values - other.values)
        return ScalarField2D(self.grid, values=self.values - other)

    def __mul__(self, other):
        if isinstance(other, ScalarField2D):
            return ScalarField2D(self.grid, values=self.values * other.values)
        return ScalarField2D(self.grid, values=self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField2D(self.grid, values=-self.values)


class VelocityField:
    """Divergence-free, mean-zero velocity pair (u1, u2)."""

    __slots__ = ("u1", "u2")

    def __init__(self, u1: ScalarField2D, u2: ScalarField2D):
        if u1.grid != u2.grid:
            raise ValueError("velocity components live on different grids")
        self.u1 = u1
        self.u2 = u2

    @property
    def grid(self) -> GridSpec2D:
        return self.u1.grid

    @classmethod
    def zeros(cls, grid: GridSpec2D) -> "VelocityField":
        return cls(ScalarField2D.zeros(grid), ScalarField2D.zeros(grid))

    def divergence_max(self) -> float:
        """Max spectral divergence, normalized as a physical field amplitude."""
        g = self.grid
        div = 1j * g.k1 * self.u1.spectral + 1j * g.k2 * self.u2.spectral
        return float(np.abs(div).max() / g.nx ** 2)

    def max_speed(self) -> float:
        speed = np.hypot(self.u1.values, self.u2.values)
        return float(speed.max())

    def gradient(self) -> np.ndarray:
        """Gradient tensor G[i, j] = d u_{i+1} / d x_{j+1}, shape (2,2,nx,nx)."""
        out = np.empty((2, 2, self.grid.nx, self.grid.nx))
        for i, comp in enumerate((self.u1, self.u2)):
            for j in (0, 1):
                out[i, j] = derivative(comp, j + 1).values
        return out


class StressField:
    """2x2 symmetric-role tensor of scalar fields (stored as one array)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec2D, values):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (2, 2, grid.nx, grid.nx):
            raise ValueError(f"stress tensor shape {self.values.shape} invalid")

    @classmethod
    def zeros(cls, grid: GridSpec2D) -> "StressField":
        return cls(grid, np.zeros((2, 2, grid.nx, grid.nx)))

    def entry(self, i: int, j: int) -> ScalarField2D:
        """Component sigma_{ij} with 1-based indices."""
        return ScalarField2D(self.grid, values=self.values[i - 1, j - 1])

    def max_entry_abs(self) -> float:
        return float(np.abs(self.values).max())


def _apply_multiplier(f: ScalarField2D, symbol) -> ScalarField2D:
    return ScalarField2D.from_spectral(f.grid, f.spectral * symbol)


def derivative(f: ScalarField2D, axis: int) -> ScalarField2D:
    """Spectral partial derivative along axis 1 or 2."""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    kd = _odd_wavenumbers(f.grid.nx)[axis - 1]
    return _apply_multiplier(f, 1j * kd)


def riesz(f: ScalarField2D, i: int) -> ScalarField2D:
    """Riesz transform: multiplier i*k_i/|k|, zero mode mapped to 0."""
    if i not in (1, 2):
        raise ValueError("component must be 1 or 2")
    g = f.grid
    kd = _odd_wavenumbers(g.nx)[i - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.where(g.ksq > 0, kd / np.sqrt(g.ksq), 0.0)
    return _apply_multiplier(f, 1j * sym)


def inverse_neg_laplacian(f: ScalarField2D) -> ScalarField2D:
    """Solve -Lap u = f with zero mean; the input zero mode is dropped."""
    g = f.grid
    with np.errstate(divide="ignore"):
        sym = np.where(g.ksq > 0, 1.0 / np.where(g.ksq > 0, g.ksq, 1.0), 0.0)
    return _apply_multiplier(f, sym)


def leray_project(v1: ScalarField2D, v2: ScalarField2D) -> VelocityField:
    """Project (v1, v2) onto divergence-free mean-zero fields."""
    g = v1.grid
    s1, s2 = v1.spectral, v2.spectral
    with np.errstate(divide="ignore", invalid="ignore"):
        kdotv = np.where(g.ksq > 0, (g.k1 * s1 + g.k2 * s2) / np.where(g.ksq > 0, g.ksq, 1.0), 0.0)
    w1 = s1 - g.k1 * kdotv
    w2 = s2 - g.k2 * kdotv
    zero = (g.ksq == 0)
    w1 = np.where(zero, 0.0, w1)
    w2 = np.where(zero, 0.0, w2)
    return VelocityField(ScalarField2D.from_spectral(g, w1), ScalarField2D.from_spectral(g, w2))


def heat_propagate(f: ScalarField2D, nu: float, t: float) -> ScalarField2D:
    """Apply the heat semigroup exp(nu*t*Lap)."""
    if t < 0:
        raise ValueError("heat propagation time must be nonnegative")
    if nu < 0:
        raise ValueError("diffusivity must be nonnegative")
    return _apply_multiplier(f, np.exp(-nu * t * f.grid.ksq))


# ---------------------------------------------------------------------------
# Mollification by a compactly supported radial bump
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bump_quadrature(n: int = 256):
    x, w = leggauss(n)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w
    profile = np.exp(1.0 / (r * r - 1.0))
    norm = 2.0 * np.pi * float(np.sum(wr * profile * r))
    return r, wr, profile, norm


def bump_transform(s) -> np.ndarray:
    """Fourier transform of the unit-mass radial bump, as a function of |xi|.

    The bump is exp(1/(|x|^2 - 1)) on |x| < 1, zero outside, normalized to
    unit integral; the transform is computed by Gauss-Legendre quadrature of
    the radial (Hankel) integral and satisfies bump_transform(0) == 1.
    """
    r, wr, profile, norm = _bump_quadrature()
    s = np.atleast_1d(np.asarray(s, dtype=float))
    # J0 evaluated on the outer product |xi|*r, vectorized over both
    vals = 2.0 * np.pi * (wr * profile * r * j0(np.multiply.outer(s, r))).sum(axis=-1) / norm
    return vals


@lru_cache(maxsize=None)
def _mollifier_multiplier(nx: int, delta: float):
    _, _, ksq = _wavenumbers(nx)
    kabs = np.sqrt(ksq)
    uniq, inverse = np.unique(kabs, return_inverse=True)
    mult = bump_transform(delta * uniq)[inverse].reshape(nx, nx)
    mult.setflags(write=False)
    return mult


def mollify(f: ScalarField2D, delta: float) -> ScalarField2D:
    """Convolve with the delta-scaled unit-mass bump; delta = 0 is identity."""
    if delta < 0:
        raise ValueError("mollification length must be nonnegative")
    if delta > np.pi:
        raise ValueError("mollifier support must fit inside the periodic cell")
    if delta == 0:
        return f
    return _apply_multiplier(f, _mollifier_multiplier(f.grid.nx, delta))


def mollify_values(values: np.ndarray, grid: GridSpec2D, delta: float) -> np.ndarray:
    """Mollify a raw (nx, nx) array; convenience path for tensor entries."""
    if delta == 0:
        return values
    if delta < 0 or delta > np.pi:
        raise ValueError("invalid mollification length")
    mult = _mollifier_multiplier(grid.nx, delta)
    return np.fft.ifft2(np.fft.fft2(values) * mult).real


# ---------------------------------------------------------------------------
# Sharp dyadic frequency blocks and the norms built on them
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _shell_mask(nx: int, j: int):
    _, _, ksq = _wavenumbers(nx)
    lo, hi = 4.0 ** (j - 1), 4.0 ** j
    mask = (ksq > lo) & (ksq <= hi)
    mask.setflags(write=False)
    return mask


def lp_block(f: ScalarField2D, j: int) -> ScalarField2D:
    """Sharp restriction to lattice modes with 2^(j-1) < |k| <= 2^j.

    Shell j = 0 is exactly {|k| = 1}; the k = 0 mode belongs to no shell, so
    the blocks sum to f minus its mean.
    """
    if j < 0:
        raise ValueError("shell index must be nonnegative")
    return _apply_multiplier(f, _shell_mask(f.grid.nx, j).astype(float))


def lq_norm(f: ScalarField2D, q: float) -> float:
    """L^q norm by equispaced quadrature; q = inf gives the grid max of |f|."""
    if q < 1:
        raise ValueError("q must be >= 1")
    v = f.values
    if np.isinf(q):
        return float(np.abs(v).max())
    return float((np.abs(v) ** q).sum() * f.grid.cell_area) ** (1.0 / q)


def besov_norm(f: ScalarField2D, s: float, p: float, q: float) -> float:
    """Besov norm over the grid's finite shell range (mean mode excluded)."""
    block_norms = []
    for j in range(f.grid.max_shell() + 1):
        block_norms.append(lq_norm(lp_block(f, j), p))
    block_norms = np.asarray(block_norms)
    lam = 2.0 ** np.arange(len(block_norms))
    weighted = lam ** s * block_norms
    if np.isinf(q):
        return float(weighted.max())
    return float((weighted ** q).sum() ** (1.0 / q))


def grid_inner(f: ScalarField2D, g: ScalarField2D) -> float:
    """L^2 inner product by grid quadrature."""
    return float((f.values * g.values).sum() * f.grid.cell_area)


def apply_H(tau: StressField) -> StressField:
    """Riesz-transform composition mapping a stress tensor to a gradient kernel.

    Componentwise: out_ij = R_j (delta_il + R_i R_l) R_k tau_lk, with the
    zero mode annihilated.
    """
    g = tau.grid
    kd1, kd2 = _odd_wavenumbers(g.nx)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(g.ksq > 0, 1.0 / np.sqrt(np.where(g.ksq > 0, g.ksq, 1.0)), 0.0)
    r = np.stack([1j * kd1 * inv, 1j * kd2 * inv])  # Riesz symbols r_1, r_2
    spec = np.stack([[np.fft.fft2(tau.values[i, j]) for j in (0, 1)] for i in (0, 1)])
    t_vec = np.einsum("kxy,ikxy->ixy", r, spec)        # t_i = R_k tau_ik
    scal = np.einsum("lxy,lxy->xy", r, t_vec)          # R_l R_k tau_lk
    out = np.empty_like(spec)
    for i in (0, 1):
        for j in (0, 1):
            out[i, j] = r[j] * t_vec[i] + r[i] * r[j] * scal
    phys = np.fft.ifft2(out, axes=(-2, -1)).real
    return StressField(g, phys)
