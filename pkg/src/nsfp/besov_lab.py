"""Numerical verification of frequency-shell interpolation inequalities.

Evaluates, over a reproducible family of test fields, the ratio of each
side of: the generalized product-interpolation inequality
||f||_{L^2r}^2 <= C ||f||_{L^r} ||grad f||_{B^0_{2,2}}, the two-sided
per-shell Bernstein inequalities, the shell-split bound optimized over
the split index, and the torus variant with the low-mode term
||u||_{L^2r}^2 <= C (||u||_2 + ||grad u||_2) ||u||_{L^r}.

With sharp shell indicators the blocks are mutually orthogonal, so the
exponent-(0,2,2) Besov norm coincides with the L^2 norm of the mean-free
part.  Constants are reported, never asserted against theory.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .spectral2d import (
    GridSpec2D,
    ScalarField2D,
    besov_norm,
    derivative,
    lp_block,
    lq_norm,
)


@dataclass(frozen=True)
class RatioReport:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


@dataclass(frozen=True)
class BernsteinReport:
    shell: int
    lam: float
    ratio_gradient_form: float   # ||D_j f||_{2r}^2 / (lam^{-2/r} ||grad D_j f||_2^2)
    ratio_lower_form: float      # ||D_j f||_{2r}^2 / (lam^{2/r}  ||D_j f||_r^2)
    gradient_identity_rel_err: float


@dataclass(frozen=True)
class SplitReport:
    m_star: int
    bound: float
    lhs: float
    lhs_blocks: float            # sum_j ||D_j f||_{2r}^2, the chain's entry point

    @property
    def ratio(self) -> float:
        return self.lhs / self.bound


def _grad_besov_022(f: ScalarField2D) -> float:
    g1 = besov_norm(derivative(f, 1), 0.0, 2.0, 2.0)
    g2 = besov_norm(derivative(f, 2), 0.0, 2.0, 2.0)
    return float(np.hypot(g1, g2))


def _grad_l2(f: ScalarField2D) -> float:
    return float(np.hypot(lq_norm(derivative(f, 1), 2), lq_norm(derivative(f, 2), 2)))


def verify_gen_ladyzhenskaya(f: ScalarField2D, r: float) -> RatioReport:
    """Ratio of the product-interpolation inequality, constant omitted."""
    if r < 1:
        raise ValueError("exponent r must be >= 1")
    rhs = lq_norm(f, r) * _grad_besov_022(f)
    if rhs == 0.0:
        raise ValueError("constant field: right-hand side vanishes")
    return RatioReport(lhs=lq_norm(f, 2 * r) ** 2, rhs=rhs)


def bernstein_check(f: ScalarField2D, j: int, r: float) -> BernsteinReport:
    """Both per-shell inequalities for the block at shell j.

    Shells holding only rounding noise are rejected: their ratios are
    quotients of garbage and say nothing about the inequality.
    """
    block = lp_block(f, j)
    bnorm2 = lq_norm(block, 2)
    if bnorm2 <= 1e-9 * lq_norm(f, 2):
        raise ValueError(f"shell {j} carries no energy for this field")
    lam = 2.0 ** j
    lhs = lq_norm(block, 2 * r) ** 2
    gnorm = _grad_l2(block)
    ratio_grad = lhs / (lam ** (-2.0 / r) * gnorm ** 2)
    ratio_lower = lhs / (lam ** (2.0 / r) * lq_norm(block, r) ** 2)
    ident = abs(gnorm - lam * bnorm2) / (lam * bnorm2)
    return BernsteinReport(shell=j, lam=lam, ratio_gradient_form=ratio_grad,
                           ratio_lower_form=ratio_lower,
                           gradient_identity_rel_err=ident)


def optimal_split(f: ScalarField2D, r: float) -> Tuple[int, SplitReport]:
    """Optimize the low/high shell-split bound over the split index.

    bound(M) = lam_M^{2/r} ||f||_{L^r}^2 + lam_M^{-2/r} ||grad f||_{B^0_{2,2}}^2,
    minimized over the grid's shell range; the measured left side should
    sit within one family constant of the optimized bound.
    """
    low = lq_norm(f, r) ** 2
    high = _grad_besov_022(f) ** 2
    if high == 0.0:
        raise ValueError("constant field has no shell content to split")
    shells = np.arange(f.grid.max_shell() + 1)
    lam = 2.0 ** shells
    bounds = lam ** (2.0 / r) * low + lam ** (-2.0 / r) * high
    m_star = int(np.argmin(bounds))
    lhs_blocks = 0.0
    for j in shells:
        bj = lq_norm(lp_block(f, int(j)), 2 * r)
        lhs_blocks += bj * bj
    report = SplitReport(m_star=m_star, bound=float(bounds[m_star]),
                         lhs=lq_norm(f, 2 * r) ** 2, lhs_blocks=lhs_blocks)
    return m_star, report


def torus_interp_check(u: ScalarField2D, r: float) -> RatioReport:
    """Torus form with the low-mode term; constants are admissible inputs."""
    rhs = (lq_norm(u, 2) + _grad_l2(u)) * lq_norm(u, r)
    if rhs == 0.0:
        raise ValueError("zero field")
    return RatioReport(lhs=lq_norm(u, 2 * r) ** 2, rhs=rhs)


# ---------------------------------------------------------------------------
# Test function family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunctionFamily:
    """Named, seed-reproducible generators of grid-independent test fields."""

    name: str
    members: Tuple[Tuple[str, Callable[[GridSpec2D], ScalarField2D]], ...]

    def materialize(self, grid: GridSpec2D) -> List[Tuple[str, ScalarField2D]]:
        return [(label, gen(grid)) for label, gen in self.members]

    def __len__(self):
        return len(self.members)


def _mode_member(k1: int, k2: int):
    def gen(grid: GridSpec2D) -> ScalarField2D:
        return ScalarField2D.from_function(grid, lambda x, y: np.sin(k1 * x + k2 * y) + 1e-1 * np.cos(k1 * x - k2 * y))
    return gen


def _bump_member(width: float):
    def gen(grid: GridSpec2D) -> ScalarField2D:
        return ScalarField2D.from_function(
            grid, lambda x, y: np.exp((np.cos(x - np.pi) + np.cos(y - np.pi) - 2.0) / width ** 2))
    return gen


def _random_member(seed: int, band: int = 8):
    # draw one fixed set of coefficients per member; the same continuum
    # trigonometric polynomial is then sampled on any grid
    rng = np.random.default_rng(seed)
    modes, amps, phases = [], [], []
    for k1 in range(-band, band + 1):
        for k2 in range(0, band + 1):
            if k2 == 0 and k1 <= 0:
                continue
            modes.append((k1, k2))
            amps.append(rng.standard_normal() / (1.0 + k1 * k1 + k2 * k2))
            phases.append(rng.uniform(0.0, 2.0 * np.pi))
    modes = np.array(modes)
    amps = np.array(amps)
    phases = np.array(phases)

    def gen(grid: GridSpec2D) -> ScalarField2D:
        x, y = grid.nodes()
        vals = np.zeros_like(x)
        for (k1, k2), a, ph in zip(modes, amps, phases):
            vals += a * np.cos(k1 * x + k2 * y + ph)
        return ScalarField2D(grid, values=vals)
    return gen


def standard_family(seed: int = 0) -> TestFunctionFamily:
    """The 20-member family: single modes, bumps of varying width, seeded
    random band-limited fields."""
    members = []
    for k1, k2 in ((1, 0), (0, 2), (2, 1), (3, 3), (5, 1), (7, 2)):
        members.append((f"mode_{k1}_{k2}", _mode_member(k1, k2)))
    for width in (0.35, 0.5, 0.7, 1.0, 1.4, 2.0):
        members.append((f"bump_w{width:g}", _bump_member(width)))
    for i in range(8):
        members.append((f"random_{i}", _random_member(seed + 17 * i)))
    return TestFunctionFamily(name="standard", members=tuple(members))


# ---------------------------------------------------------------------------
# Sweep driver and reports
# ---------------------------------------------------------------------------

@dataclass
class LabReport:
    grid_nx: int
    rows: List[Tuple[str, str, float, float]]  # (function, member, r, ratio)
    suprema: dict                              # (function, r) -> sup ratio

    def supremum(self, function: str, r: float) -> float:
        return self.suprema[(function, r)]


def run_inequality_sweep(grid: GridSpec2D, family: TestFunctionFamily,
                         r_values: Sequence[float] = (1.0, 2.0, 4.0)) -> LabReport:
    if len(family) == 0:
        raise ValueError("empty test function family")
    rows = []
    suprema = {}
    fields = family.materialize(grid)
    for r in r_values:
        for label, f in fields:
            checks = (
                ("gen_ladyzhenskaya", verify_gen_ladyzhenskaya(f, r).ratio),
                ("torus_interp", torus_interp_check(f, r).ratio),
                ("optimal_split", optimal_split(f, r)[1].ratio),
            )
            for fname, ratio in checks:
                rows.append((fname, label, float(r), float(ratio)))
                key = (fname, float(r))
                suprema[key] = max(suprema.get(key, 0.0), float(ratio))
    # Bernstein ratios swept over every occupied shell of every member
    for r in r_values:
        for label, f in fields:
            for j in range(grid.max_shell() + 1):
                try:
                    rep = bernstein_check(f, j, r)
                except ValueError:
                    continue
                for fname, ratio in (("bernstein_gradient", rep.ratio_gradient_form),
                                     ("bernstein_lower", rep.ratio_lower_form)):
                    rows.append((fname, label, float(r), float(ratio)))
                    key = (fname, float(r))
                    suprema[key] = max(suprema.get(key, 0.0), float(ratio))
    return LabReport(grid_nx=grid.nx, rows=rows, suprema=suprema)


def report_to_csv(report: LabReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["function", "r", "ratio"])
    for fname, _label, r, ratio in report.rows:
        writer.writerow([fname, f"{r:.17g}", f"{ratio:.17g}"])
    return buf.getvalue()


def write_report_csv(path, report: LabReport) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(report_to_csv(report))


def write_report_json(path, report: LabReport, extra: dict = None) -> None:
    payload = {
        "grid_nx": report.grid_nx,
        "members": sorted({label for _f, label, _r, _ratio in report.rows}),
        "suprema": [{"function": f, "r": r, "sup_ratio": v}
                    for (f, r), v in sorted(report.suprema.items())],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
