"""Monitored quantities and their time series.

Every quantity tracked here is an a priori control for the coupled
system: energies and entropy production, vorticity and velocity-gradient
norms, the orientation-smoothed gradient monitor of f, its time
accumulators, the total-stress norms, and the discrete invariants (mass,
orientation mass, positivity, incompressibility).

Norm conventions: the pointwise size of a 2x2 tensor is the max over
entries for sup norms (tau_inf, sigma_inf) and the Frobenius norm for
gradient quantities (grad_u_inf, stress gradients).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import circle as circ
from . import coupled as cp
from .coupled import DistributionField, ModelParams, State
from .spectral2d import ScalarField2D, lq_norm


@dataclass(frozen=True)
class MonitorConfig:
    """Exponents for the gradient monitors plus the residual stencil width."""

    p: float
    q: float
    alpha: float
    window: int = 3

    def __post_init__(self):
        if self.q < 4:
            raise ValueError("monitor exponent q must be >= 4")
        if self.p <= 2 * self.q / (self.q - 2):
            raise ValueError("monitor exponent p must exceed 2q/(q-2)")
        if self.alpha <= 1.5:
            raise ValueError("alpha must exceed 3/2")
        if self.window < 2:
            raise ValueError("window must be >= 2")


@dataclass
class DiagnosticsRecord:
    """One time sample of every monitored quantity.

    Field order is the serialization order for CSV and JSON output.
    grad_u_l2sq is bookkeeping for the balance residual and is not
    serialized.
    """

    t: float
    kinetic_energy: float
    free_energy_total: float
    dissipation_total: float
    balance_residual: float
    grad_u_inf: float
    omega_lq: float
    fgrad_lq: float
    tau_grad_accum: float
    fgrad_accum: float
    tau_inf: float
    sigma_inf: float
    log_bound_ratio: float
    total_mass: float
    rho_dev: float
    min_f: float
    div_u_max: float
    positivity_flag: int
    grad_u_l2sq: float = 0.0


CSV_FIELDS = tuple(f.name for f in dc_fields(DiagnosticsRecord))[:-1]


def orientation_grad_norm(f: DistributionField, alpha: float) -> ScalarField2D:
    """Pointwise monitor N(x): the orientation-L2 size of the smoothed
    spatial gradient of f.

    N(x)^2 = int |R grad_x f(x, theta)|^2 dtheta with R the
    negative-order smoothing of order alpha on circle modes.
    """
    g1, g2 = cp._grad_x_cube(f.values, f.grid)
    r1 = circ.smooth_R(g1, alpha)
    r2 = circ.smooth_R(g2, alpha)
    n_sq = circ.circle_integrate(r1 ** 2 + r2 ** 2)
    return ScalarField2D(f.grid, values=np.sqrt(np.maximum(n_sq, 0.0)))


def fgrad_lq_value(state: State, params: ModelParams, mon: MonitorConfig) -> float:
    return lq_norm(orientation_grad_norm(state.f, mon.alpha), mon.q)


def stress_grad_lq(state: State, params: ModelParams, q: float) -> float:
    """L^q norm of the full spatial gradient of the total stress tau."""
    tau = cp.total_stress(state, params)
    from .spectral2d import _odd_wavenumbers

    grid = state.u.grid
    kd1, kd2 = _odd_wavenumbers(grid.nx)
    acc = np.zeros((grid.nx, grid.nx))
    for i in (0, 1):
        for j in (0, 1):
            spec = np.fft.fft2(tau.values[i, j])
            acc += np.fft.ifft2(1j * kd1 * spec).real ** 2
            acc += np.fft.ifft2(1j * kd2 * spec).real ** 2
    field = ScalarField2D(grid, values=np.sqrt(acc))
    return lq_norm(field, q)


def lp_time_accumulate(times, values, p: float) -> np.ndarray:
    """Running (int_0^t v(s)^p ds)^(1/p) by trapezoidal quadrature.

    Nondecreasing for nonnegative samples; used for both the stress
    gradient and the f-gradient accumulators.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be equal-length 1-D arrays")
    vp = v ** p
    out = np.zeros_like(vp)
    if len(t) > 1:
        incr = 0.5 * np.diff(t) * (vp[1:] + vp[:-1])
        out[1:] = np.cumsum(incr)
    return out ** (1.0 / p)


def vorticity(u) -> ScalarField2D:
    from .spectral2d import derivative

    return derivative(u.u2, 1) - derivative(u.u1, 2)


def vorticity_lq(u, q: float) -> float:
    return lq_norm(vorticity(u), q)


def grad_u_inf(u) -> float:
    """Pointwise Frobenius norm of grad u, maximized over the grid."""
    g = u.gradient()
    return float(np.sqrt((g ** 2).sum(axis=(0, 1))).max())


def log_bound_ratio(record: DiagnosticsRecord) -> float:
    """Ratio whose running maximum is the empirical gradient log-bound constant."""
    return record.grad_u_inf / math.log(2.0 + record.fgrad_accum)


@dataclass(frozen=True)
class InvariantReport:
    total_mass: float
    rho_dev: float
    min_f: float
    div_u_max: float
    positivity_flag: int


def invariant_report(state: State) -> InvariantReport:
    rho = state.f.rho()
    min_f = state.f.min_value()
    return InvariantReport(
        total_mass=state.f.total_mass(),
        rho_dev=float(np.abs(rho - 1.0).max()),
        min_f=min_f,
        div_u_max=state.u.divergence_max(),
        positivity_flag=int(min_f <= 0.0),
    )


def compute_record(state: State, params: ModelParams, mon: MonitorConfig,
                   tau_grad_accum: float = 0.0, fgrad_accum: float = 0.0,
                   fgrad_rate: float = None) -> DiagnosticsRecord:
    """Assemble one record from the state; the balance residual is filled
    by finalize_balance once the neighbouring samples exist."""
    sigma = cp.compute_stress(state.f, params.kernel, params.coeffs)
    tau = cp.total_stress(state, params, sigma=sigma)
    _, fe_total, fe_floor = cp.free_energy(state.f, params.kernel)
    _, d_total, d_floor = cp.dissipation(state.f, params.kernel)
    inv = invariant_report(state)
    fgrad = fgrad_rate if fgrad_rate is not None else fgrad_lq_value(state, params, mon)
    rec = DiagnosticsRecord(
        t=state.t,
        kinetic_energy=cp.kinetic_energy(state.u),
        free_energy_total=fe_total,
        dissipation_total=d_total,
        balance_residual=0.0,
        grad_u_inf=grad_u_inf(state.u),
        omega_lq=vorticity_lq(state.u, mon.q),
        fgrad_lq=fgrad,
        tau_grad_accum=tau_grad_accum,
        fgrad_accum=fgrad_accum,
        tau_inf=tau.max_entry_abs(),
        sigma_inf=sigma.max_entry_abs(),
        log_bound_ratio=0.0,
        total_mass=inv.total_mass,
        rho_dev=inv.rho_dev,
        min_f=inv.min_f,
        div_u_max=inv.div_u_max,
        positivity_flag=int(inv.positivity_flag or fe_floor or d_floor),
        grad_u_l2sq=cp.grad_u_l2sq(state.u),
    )
    rec.log_bound_ratio = log_bound_ratio(rec)
    return rec


def balance_residual(records, nu: float, kappa: float) -> float:
    """Residual of the energy balance at the middle of a record window.

    d/dt (kinetic + free energy) + nu*int|grad u|^2 + kappa*dissipation,
    with the time derivative by centered difference (one-sided at a
    two-sample window).  Vanishes with the scheme's order at delta = 0.
    """
    if len(records) < 2:
        return 0.0
    energies = [r.kinetic_energy + r.free_energy_total for r in records]
    ts = [r.t for r in records]
    if len(records) == 2:
        mid = 0
        dedt = (energies[1] - energies[0]) / (ts[1] - ts[0])
    else:
        mid = len(records) // 2
        dedt = (energies[mid + 1] - energies[mid - 1]) / (ts[mid + 1] - ts[mid - 1])
    r = records[mid]
    return dedt + nu * r.grad_u_l2sq + kappa * r.dissipation_total


def finalize_balance(records, nu: float, kappa: float) -> None:
    """Fill balance_residual for a whole series (centered interior,
    one-sided at the ends so every record stays finite)."""
    n = len(records)
    if n < 2:
        return
    energies = np.array([r.kinetic_energy + r.free_energy_total for r in records])
    ts = np.array([r.t for r in records])
    for i, r in enumerate(records):
        lo = max(i - 1, 0)
        hi = min(i + 1, n - 1)
        dedt = (energies[hi] - energies[lo]) / (ts[hi] - ts[lo])
        r.balance_residual = float(dedt + nu * r.grad_u_l2sq + kappa * r.dissipation_total)


# ---------------------------------------------------------------------------
# Derived pointwise bound |grad J_delta(sigma)| <= C * N
# ---------------------------------------------------------------------------

def stress_gradient_constant(params: ModelParams, nm: int, rho_max: float = 1.0) -> float:
    """Certified constant for the pointwise stress-gradient bound.

    Each entry of grad sigma pairs grad_x f against a smooth band-limited
    circle function g; Cauchy-Schwarz after moving the inverse smoothing
    onto g gives |<g, grad_x f>| <= ||R^-1 g||_2 ||R grad_x f||_2, and the
    three contributions (kernel torque on grad f, potential-of-grad-f
    torque, coefficient derivative) are summed with sup bounds.  The
    Frobenius sum over the four entries costs a factor 2.
    """
    coeffs, kernel, alpha = params.coeffs, params.kernel, params.alpha
    w = 2.0 * np.pi / nm
    # C1: coefficient-derivative term, per entry ||R^-1 dc_ij||_2
    c1 = 0.0
    for i in (0, 1):
        for j in (0, 1):
            g = circ.smooth_R_inverse(coeffs.dc[i, j], alpha)
            c1 = max(c1, float(np.sqrt((g ** 2).sum() * w)))
    # C_k: torque of the potential built from grad f, sup over base points of
    # ||R^-1 d k(theta - .)/dtheta||_2 (translation invariant: one evaluation)
    dk = kernel.grad_samples(nm)
    gk = circ.smooth_R_inverse(dk, alpha)
    ck = float(np.sqrt((gk ** 2).sum() * w))
    # C_B: ||R^-1 (c_ij dU)||_2 <= (1 + band^2)^(alpha/2) * sup|c| * sup|dU| * sqrt(2 pi)
    spec = np.fft.rfft(coeffs.c, axis=-1)
    tol = 1e-12 * max(np.abs(spec).max(), 1.0)
    band_c = int(max(np.nonzero(np.abs(spec).max(axis=(0, 1)) > tol)[0], default=0))
    spec_k = np.fft.rfft(kernel.samples(nm))
    band_k = int(max(np.nonzero(np.abs(spec_k) > 1e-12 * max(np.abs(spec_k).max(), 1.0))[0], default=0))
    sup_du = float(np.abs(dk).max()) * rho_max
    cb = (1.0 + (band_c + band_k) ** 2) ** (alpha / 2) * coeffs.sup_c * sup_du * np.sqrt(2 * np.pi)
    per_entry = c1 + rho_max * (coeffs.sup_c * ck + cb)
    return 2.0 * per_entry


def stress_gradient_check(state: State, params: ModelParams) -> dict:
    """Evaluate both sides of the pointwise bound on the current state."""
    grid = state.f.grid
    sigma = cp.compute_stress(state.f, params.kernel, params.coeffs)
    sig = cp._mollify_tensor(sigma.values, grid, params.delta)
    from .spectral2d import _odd_wavenumbers

    kd1, kd2 = _odd_wavenumbers(grid.nx)
    acc = np.zeros((grid.nx, grid.nx))
    for i in (0, 1):
        for j in (0, 1):
            spec = np.fft.fft2(sig[i, j])
            acc += np.fft.ifft2(1j * kd1 * spec).real ** 2
            acc += np.fft.ifft2(1j * kd2 * spec).real ** 2
    lhs = np.sqrt(acc)
    n_field = orientation_grad_norm(state.f, params.alpha).values
    rho_max = float(state.f.rho().max())
    const = stress_gradient_constant(params, state.f.circle.nm, rho_max=rho_max)
    margin = const * n_field - lhs
    ratio = float((lhs / np.maximum(const * n_field, 1e-300)).max())
    return {"constant": const, "max_ratio": ratio, "satisfied": bool(margin.min() >= -1e-12)}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _format_value(name: str, value) -> str:
    if name == "positivity_flag":
        return str(int(value))
    return f"{value:.17g}"


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([_format_value(name, getattr(r, name)) for name in CSV_FIELDS])
    return buf.getvalue()


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def write_records_json(path, records) -> None:
    rows = [{name: (int(getattr(r, name)) if name == "positivity_flag"
                    else float(getattr(r, name))) for name in CSV_FIELDS}
            for r in records]
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1)
        fh.write("\n")
