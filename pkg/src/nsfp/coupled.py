"""Coupled model assembly: state, drift, stress, right-hand sides, energies.

The unknowns are an incompressible velocity u(x, t) on the periodic
square and an orientation density f(x, theta, t).  The flow gradient
drives rod rotation through the drift W = grad u : c, the rods feed
stress back through an orientation integral, and a mean-field potential
U[f] aligns neighbouring rods.  A mollifier of width delta regularizes
the exchange terms; delta = 0 is the unregularized system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import circle as circ
from .circle import CircleGrid, InteractionKernel, RodCoefficients
from .parallel import map_row_blocks
from .spectral2d import (
    GridSpec2D,
    ScalarField2D,
    StressField,
    VelocityField,
    derivative,
    inverse_neg_laplacian,
    leray_project,
    mollify_values,
    riesz,
)

ENTROPY_FLOOR = 1e-14


@dataclass(frozen=True)
class ModelParams:
    """Physical and monitoring parameters of the coupled system."""

    nu: float
    kappa: float
    kernel: InteractionKernel
    coeffs: RodCoefficients
    delta: float = 0.0
    alpha: float = 2.0
    q: float = 4.0
    p: float = 6.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("viscosity nu must be positive")
        if self.kappa <= 0:
            raise ValueError("diffusivity kappa must be positive")
        if self.delta < 0 or self.delta > np.pi:
            raise ValueError("mollification length must lie in [0, pi]")
        if self.q < 4:
            raise ValueError("monitor exponent q must be >= 4")
        if self.p <= 2 * self.q / (self.q - 2):
            raise ValueError(f"monitor exponent p must exceed 2q/(q-2) = {2 * self.q / (self.q - 2):g}")
        if self.alpha <= 1.5:
            raise ValueError("smoothing order alpha must exceed 3/2")


class DistributionField:
    """Orientation density f(x1, x2, theta) on grid x circle."""

    __slots__ = ("grid", "circle", "values")

    def __init__(self, grid: GridSpec2D, circle: CircleGrid, values):
        self.grid = grid
        self.circle = circle
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (grid.nx, grid.nx, circle.nm):
            raise ValueError(f"distribution shape {self.values.shape} invalid")

    @classmethod
    def uniform(cls, grid: GridSpec2D, circle: CircleGrid) -> "DistributionField":
        return cls(grid, circle, np.full((grid.nx, grid.nx, circle.nm), 1.0 / (2.0 * np.pi)))

    def rho(self) -> np.ndarray:
        """Orientation mass per point, int f dtheta."""
        return circ.circle_integrate(self.values)

    def total_mass(self) -> float:
        return float(self.rho().sum() * self.grid.cell_area)

    def min_value(self) -> float:
        return float(self.values.min())


@dataclass
class State:
    """One snapshot of the coupled system."""

    t: float
    u: VelocityField
    f: DistributionField


def compute_W(grad_u: np.ndarray, coeffs: RodCoefficients) -> np.ndarray:
    """Rotational drift W(x, theta) = sum_ij du_i/dx_j c_{ji}(theta).

    grad_u has shape (2, 2, nx, nx) with grad_u[i, j] = du_{i+1}/dx_{j+1};
    the result is an (nx, nx, nm) cube.
    """
    return np.einsum("ijxy,jit->xyt", grad_u, coeffs.c)


def compute_stress(f: DistributionField, kernel: InteractionKernel,
                   coeffs: RodCoefficients) -> StressField:
    """Added particle stress, an orientation integral against f.

    sigma_ij(x) = int (c_ij dU/dtheta - dc_ij/dtheta) f dtheta computed by
    trapezoidal quadrature, with U the mean-field potential of f(x, .).
    Returned unfiltered: the pointwise quadrature bound
    |sigma_ij| <= (sup|dc| + Lip(k) * rho) * rho holds sample by sample.
    """
    w = f.circle.weight

    def block(fv):
        U = circ.potential_U(fv, kernel)
        dU = circ.grad_theta(U)
        s = np.einsum("ijt,xyt->ijxy", coeffs.c, dU * fv)
        s -= np.einsum("ijt,xyt->ijxy", coeffs.dc, fv)
        return s * w

    vals = map_row_blocks(block, f.values, out_row_axis=2)
    return StressField(f.grid, vals)


def velocity_gradient(u: VelocityField) -> np.ndarray:
    return u.gradient()


def _mollify_tensor(values: np.ndarray, grid: GridSpec2D, delta: float) -> np.ndarray:
    if delta == 0:
        return values
    out = np.empty_like(values)
    for i in (0, 1):
        for j in (0, 1):
            out[i, j] = mollify_values(values[i, j], grid, delta)
    return out


def _mask_xy(cube_or_field: np.ndarray, grid: GridSpec2D) -> np.ndarray:
    """2/3-rule dealiasing over the two spatial axes."""
    mask = grid.dealias_mask
    spec = np.fft.fft2(cube_or_field, axes=(0, 1))
    if cube_or_field.ndim == 3:
        spec *= mask[:, :, None]
    else:
        spec *= mask
    return np.fft.ifft2(spec, axes=(0, 1)).real


def _grad_x_cube(values: np.ndarray, grid: GridSpec2D) -> tuple:
    """Spatial gradient of an (nx, nx, nm) cube, spectrally in x."""
    from .spectral2d import _odd_wavenumbers

    kd1, kd2 = _odd_wavenumbers(grid.nx)
    spec = np.fft.fft2(values, axes=(0, 1))
    g1 = np.fft.ifft2(1j * kd1[:, :, None] * spec, axes=(0, 1)).real
    g2 = np.fft.ifft2(1j * kd2[:, :, None] * spec, axes=(0, 1)).real
    return g1, g2


def fp_rhs(state: State, params: ModelParams) -> np.ndarray:
    """Full time derivative of f for the (mollified) orientation equation.

    Conservative by construction: the (x, theta) integral of the result
    vanishes to rounding.  Products are dealiased in x and theta.
    """
    f = state.f
    grid, kernel, coeffs = f.grid, params.kernel, params.coeffs
    delta, kappa = params.delta, params.kappa

    gu = _mollify_tensor(state.u.gradient(), grid, delta)
    W = compute_W(gu, coeffs)
    flux_W = circ.theta_dealias(_mask_xy(W * f.values, grid))

    u1 = mollify_values(state.u.u1.values, grid, delta)
    u2 = mollify_values(state.u.u2.values, grid, delta)
    g1, g2 = _grad_x_cube(f.values, grid)
    adv = _mask_xy(u1[:, :, None] * g1 + u2[:, :, None] * g2, grid)

    U = circ.potential_U(f.values, kernel)
    flux_U = circ.theta_dealias(_mask_xy(f.values * circ.grad_theta(U), grid))

    return (-adv
            - circ.grad_theta(flux_W)
            + kappa * circ.laplace_theta(f.values)
            + kappa * circ.grad_theta(flux_U))


def ns_nonlinear(state: State, params: ModelParams,
                 sigma: StressField = None) -> VelocityField:
    """Leray projection of -u.grad(u) + div J_delta(sigma).

    The viscous term is kept out so that time steppers can treat it with
    an exact integrating factor; ns_rhs adds it back.
    """
    u = state.u
    grid = u.grid
    if sigma is None:
        sigma = compute_stress(state.f, params.kernel, params.coeffs)
    sig = _mollify_tensor(sigma.values, grid, params.delta)

    g = u.gradient()
    u1v, u2v = u.u1.values, u.u2.values
    adv1 = _mask_xy(u1v * g[0, 0] + u2v * g[0, 1], grid)
    adv2 = _mask_xy(u1v * g[1, 0] + u2v * g[1, 1], grid)

    force1 = ScalarField2D(grid, values=-adv1) \
        + derivative(ScalarField2D(grid, values=_mask_xy(sig[0, 0], grid)), 1) \
        + derivative(ScalarField2D(grid, values=_mask_xy(sig[0, 1], grid)), 2)
    force2 = ScalarField2D(grid, values=-adv2) \
        + derivative(ScalarField2D(grid, values=_mask_xy(sig[1, 0], grid)), 1) \
        + derivative(ScalarField2D(grid, values=_mask_xy(sig[1, 1], grid)), 2)
    return leray_project(force1, force2)


def ns_rhs(state: State, params: ModelParams) -> VelocityField:
    """Full time derivative of u: projected forcing plus viscous diffusion."""
    nl = ns_nonlinear(state, params)
    grid = state.u.grid
    lap1 = ScalarField2D.from_spectral(grid, -grid.ksq * state.u.u1.spectral)
    lap2 = ScalarField2D.from_spectral(grid, -grid.ksq * state.u.u2.spectral)
    return VelocityField(nl.u1 + params.nu * lap1, nl.u2 + params.nu * lap2)


def total_stress(state: State, params: ModelParams,
                 sigma: StressField = None) -> StressField:
    """tau_ij = J_delta(sigma_ij) - u_i u_j."""
    if sigma is None:
        sigma = compute_stress(state.f, params.kernel, params.coeffs)
    grid = state.u.grid
    sig = _mollify_tensor(sigma.values, grid, params.delta)
    uv = (state.u.u1.values, state.u.u2.values)
    tau = np.empty_like(sig)
    for i in (0, 1):
        for j in (0, 1):
            tau[i, j] = sig[i, j] - uv[i] * uv[j]
    return StressField(grid, tau)


def pressure(state: State, params: ModelParams) -> ScalarField2D:
    """Pressure recovered from the divergence of the momentum balance.

    Solves Lap p = d_i d_j tau_ij with zero mean.  pressure_via_riesz is
    the same operator written as a Riesz-transform composition; the two
    agree to rounding on any state.
    """
    tau = total_stress(state, params)
    grid = state.u.grid
    acc = ScalarField2D.zeros(grid)
    for i in (0, 1):
        for j in (0, 1):
            tij = ScalarField2D(grid, values=tau.values[i, j])
            acc = acc + derivative(derivative(tij, i + 1), j + 1)
    return -1.0 * inverse_neg_laplacian(acc)


def pressure_via_riesz(state: State, params: ModelParams) -> ScalarField2D:
    """Dual route: p = -R_i R_j tau_ij with the standard Riesz transforms."""
    tau = total_stress(state, params)
    grid = state.u.grid
    acc = ScalarField2D.zeros(grid)
    for i in (0, 1):
        for j in (0, 1):
            tij = ScalarField2D(grid, values=tau.values[i, j])
            acc = acc + riesz(riesz(tij, i + 1), j + 1)
    return -1.0 * acc


def free_energy(f: DistributionField, kernel: InteractionKernel):
    """Orientation free energy density over x and its spatial integral.

    Returns (field, total, floored): the entropy term evaluates
    f*log(f) with f clamped below at a tiny floor; floored reports
    whether any sample needed clamping (positivity violated).
    """
    fv = f.values
    floored = bool(fv.min() <= 0.0)
    safe = np.maximum(fv, ENTROPY_FLOOR)
    U = circ.potential_U(fv, kernel)
    dens = circ.circle_integrate(safe * np.log(safe) + 0.5 * fv * U)
    total = float(dens.sum() * f.grid.cell_area)
    return ScalarField2D(f.grid, values=dens), total, floored


def dissipation(f: DistributionField, kernel: InteractionKernel):
    """Entropy production density int |d(U + log f)/dtheta|^2 f dtheta.

    Nonnegative pointwise; zero exactly at local equilibria.  Returns
    (field, total, floored) like free_energy.
    """
    fv = f.values
    floored = bool(fv.min() <= 0.0)
    safe = np.maximum(fv, ENTROPY_FLOOR)
    U = circ.potential_U(fv, kernel)
    drive = circ.grad_theta(U + np.log(safe))
    dens = circ.circle_integrate(drive ** 2 * safe)
    total = float(dens.sum() * f.grid.cell_area)
    return ScalarField2D(f.grid, values=dens), total, floored


def kinetic_energy(u: VelocityField) -> float:
    """(1/2) int |u|^2 dx by grid quadrature."""
    v = u.u1.values ** 2 + u.u2.values ** 2
    return 0.5 * float(v.sum() * u.grid.cell_area)


def grad_u_l2sq(u: VelocityField) -> float:
    """int |grad u|^2 dx (Frobenius), the viscous dissipation rate / nu."""
    g = u.gradient()
    return float((g ** 2).sum() * u.grid.cell_area)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

def taylor_green(grid: GridSpec2D, amplitude: float = 1.0) -> VelocityField:
    x1, x2 = grid.nodes()
    u1 = ScalarField2D(grid, values=amplitude * np.sin(x1) * np.cos(x2))
    u2 = ScalarField2D(grid, values=-amplitude * np.cos(x1) * np.sin(x2))
    return VelocityField(u1, u2)


def standard_initial_data(grid: GridSpec2D, circle: CircleGrid,
                          velocity_amplitude: float = 1.0,
                          perturbation_amplitude: float = 0.0,
                          f_amplitude: float = 0.1,
                          seed: int = 0) -> State:
    """Divergence-free velocity and strictly positive unit-mass density.

    The velocity is a Taylor-Green cell plus an optional random
    band-limited divergence-free perturbation; f is a low-harmonic
    perturbation of the uniform density, renormalized so the orientation
    mass is exactly one at every point.
    """
    if not 0.0 <= f_amplitude < 1.0:
        raise ValueError("f_amplitude must lie in [0, 1) to keep f positive")
    rng = np.random.default_rng(seed)
    u = taylor_green(grid, velocity_amplitude)

    if perturbation_amplitude > 0:
        x1, x2 = grid.nodes()
        psi = np.zeros_like(x1)
        for k1 in range(-3, 4):
            for k2 in range(0, 4):
                if (k2 == 0 and k1 <= 0) or (k1 == 0 and k2 == 0):
                    continue
                amp = rng.standard_normal() / (1.0 + k1 * k1 + k2 * k2)
                phase = rng.uniform(0, 2 * np.pi)
                psi += amp * np.cos(k1 * x1 + k2 * x2 + phase)
        smax = max(np.abs(psi).max(), 1e-30)
        psi_f = ScalarField2D(grid, values=psi * (perturbation_amplitude / smax))
        u = VelocityField(u.u1 + derivative(psi_f, 2), u.u2 - 1.0 * derivative(psi_f, 1))

    u = leray_project(u.u1.dealias(), u.u2.dealias())

    x1, x2 = grid.nodes()
    theta = circle.nodes
    pert = np.zeros((grid.nx, grid.nx, circle.nm))
    for n in (1, 2):
        for k1 in range(-2, 3):
            for k2 in range(-2, 3):
                a, bphase, cphase = rng.standard_normal(), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi)
                sx = np.cos(k1 * x1 + k2 * x2 + bphase)
                pert += a * sx[:, :, None] * np.cos(n * theta + cphase)[None, None, :]
    pmax = max(np.abs(pert).max(), 1e-30)
    fv = (1.0 + pert * (f_amplitude / pmax)) / (2.0 * np.pi)
    fv = fv / circ.circle_integrate(fv)[:, :, None]  # orientation mass exactly 1
    fv = circ.theta_dealias(_mask_xy(fv, grid))
    f = DistributionField(grid, circle, fv)
    if f.min_value() <= 0:
        raise ValueError("initial density not strictly positive; lower f_amplitude")
    return State(t=0.0, u=u, f=f)


def validate_standard_data(state: State, tol: float = 1e-8) -> None:
    """Check the admissibility clauses of the initial data."""
    if state.u.divergence_max() > 1e-10:
        raise ValueError("initial velocity is not divergence-free")
    if state.f.min_value() <= 0:
        raise ValueError("initial density must be strictly positive")
    rho = state.f.rho()
    if np.abs(rho - 1.0).max() > tol:
        raise ValueError("initial orientation mass must be identically 1")
