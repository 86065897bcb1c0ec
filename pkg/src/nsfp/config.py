"""Run configuration: flat key = value text with section headers.

The format is INI-style and diffable; ``default_config_text`` emits a
fully commented template, and loading it back reproduces the defaults
exactly.  Exponent constraints are validated at load time.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circle import CircleGrid, InteractionKernel, RodCoefficients
from .coupled import ModelParams, standard_initial_data
from .spectral2d import GridSpec2D
from .stepping import PicardConfig, StepperConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # grid
    nx: int = 32
    nm: int = 32
    # physical / monitor parameters
    nu: float = 0.1
    kappa: float = 0.1
    delta: float = 0.0
    b: float = 0.5
    alpha: float = 2.0
    p: float = 6.0
    q: float = 4.0
    # drift coefficients: rod | zero | custom
    coefficients: str = "rod"
    kernel_cos: tuple = ()
    coeff_cos: dict = field(default_factory=dict)   # e.g. {"c12": (0.5, 0, 0.5)}
    coeff_sin: dict = field(default_factory=dict)
    # stepping
    scheme: str = "if_rk2"
    dt: float = 1e-3
    t_end: float = 1.0
    cfl_safety: float = 0.5
    diag_every: int = 10
    adaptive: bool = False
    # solver
    mode: str = "imex"
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    # initial data
    velocity_amplitude: float = 1.0
    perturbation_amplitude: float = 0.0
    f_amplitude: float = 0.1
    seed: int = 0
    # output
    directory: str = "out"
    checkpoint_every: int = 0

    def validate(self) -> None:
        if self.nx % 2 or self.nx < 8 or self.nm % 2 or self.nm < 8:
            raise ConfigError("nx and nm must be even and >= 8")
        if self.nu <= 0 or self.kappa <= 0:
            raise ConfigError("nu and kappa must be positive")
        if self.q < 4:
            raise ConfigError(f"monitor exponent q must be >= 4 (got q = {self.q:g})")
        if self.p <= 2 * self.q / (self.q - 2):
            raise ConfigError(
                f"monitor exponent p must exceed 2q/(q-2) = {2 * self.q / (self.q - 2):g} "
                f"(got p = {self.p:g})")
        if self.alpha <= 1.5:
            raise ConfigError("smoothing order alpha must exceed 3/2")
        if self.delta < 0 or self.delta > np.pi:
            raise ConfigError("delta must lie in [0, pi]")
        if self.scheme not in ("imex_euler", "if_rk2"):
            raise ConfigError("scheme must be imex_euler or if_rk2")
        if self.mode not in ("imex", "picard"):
            raise ConfigError("solver mode must be imex or picard")
        if self.coefficients not in ("rod", "zero", "custom"):
            raise ConfigError("coefficients must be rod, zero or custom")
        if not 0 <= self.f_amplitude < 1:
            raise ConfigError("f_amplitude must lie in [0, 1)")

    # ---- model assembly -------------------------------------------------

    def grid(self) -> GridSpec2D:
        return GridSpec2D(self.nx)

    def circle(self) -> CircleGrid:
        return CircleGrid(self.nm)

    def kernel(self) -> InteractionKernel:
        cos = tuple(self.kernel_cos) if self.kernel_cos else None
        return InteractionKernel(b=self.b, cos_coeffs=cos)

    def coeffs(self) -> RodCoefficients:
        circle = self.circle()
        if self.coefficients == "rod":
            return RodCoefficients.rod_model(circle)
        if self.coefficients == "zero":
            return RodCoefficients.zero(circle)
        names = ("c11", "c12", "c21", "c22")
        cos = [[self.coeff_cos.get(n, ()) for n in names[row * 2:row * 2 + 2]]
               for row in (0, 1)]
        sin = [[self.coeff_sin.get(n, ()) for n in names[row * 2:row * 2 + 2]]
               for row in (0, 1)]
        return RodCoefficients.from_fourier(circle, cos, sin)

    def model_params(self) -> ModelParams:
        try:
            return ModelParams(nu=self.nu, kappa=self.kappa, delta=self.delta,
                               kernel=self.kernel(), coeffs=self.coeffs(),
                               alpha=self.alpha, q=self.q, p=self.p)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, t_end=self.t_end, scheme=self.scheme,
                             cfl_safety=self.cfl_safety, diag_every=self.diag_every,
                             adaptive=self.adaptive)

    def picard(self) -> PicardConfig:
        return PicardConfig(tol=self.picard_tol, max_iter=self.picard_max_iter)

    def initial_state(self, seed=None):
        return standard_initial_data(
            self.grid(), self.circle(),
            velocity_amplitude=self.velocity_amplitude,
            perturbation_amplitude=self.perturbation_amplitude,
            f_amplitude=self.f_amplitude,
            seed=self.seed if seed is None else seed)


DEFAULT_TEMPLATE = """\
# Simulation configuration.
# Flat key = value entries grouped by section; '#' starts a comment.

[grid]
# modes per spatial axis (even, >= 8; powers of two recommended)
nx = {nx}
# orientation nodes on the circle (even, >= 8)
nm = {nm}

[params]
# kinematic viscosity (> 0)
nu = {nu}
# rotational diffusivity (> 0)
kappa = {kappa}
# mollification length (0 disables smoothing; must not exceed pi)
delta = {delta}
# alignment coupling strength of the orientation kernel (>= 0)
b = {b}
# smoothing order of the gradient monitor (> 3/2)
alpha = {alpha}
# monitor exponents: q >= 4 and p > 2q/(q-2)
p = {p}
q = {q}
# drift coefficients: rod (default), zero (decoupled), or custom
coefficients = {coefficients}
# custom even kernel as cosine coefficients 'a0, a1, a2, ...'; blank
# selects the default -b*cos(2 dtheta) form
kernel_cos =
# custom coefficient entries (only read when coefficients = custom), e.g.
# c12_cos = 0.5, 0, 0.5

[stepper]
# time scheme: if_rk2 (second order) or imex_euler (first order)
scheme = {scheme}
# time step and final time
dt = {dt}
t_end = {t_end}
# CFL safety factor in (0, 1], used by the adaptive mode and assertions
cfl_safety = {cfl_safety}
# steps between diagnostics records
diag_every = {diag_every}
# adapt dt each step to the CFL bound (false = fixed dt)
adaptive = {adaptive}

[solver]
# per-step solver: imex or picard
mode = {mode}

[picard]
# successive-difference tolerance in the discrete L2 norm of (u, f)
tol = {picard_tol}
max_iter = {picard_max_iter}

[initial]
# Taylor-Green amplitude of the initial velocity
velocity_amplitude = {velocity_amplitude}
# divergence-free random perturbation amplitude (0 disables)
perturbation_amplitude = {perturbation_amplitude}
# size of the low-harmonic density perturbation, in [0, 1)
f_amplitude = {f_amplitude}
# RNG seed for the initial data
seed = {seed}

[output]
# run artifacts (diagnostics.csv, checkpoints) are written here
directory = {directory}
# steps between checkpoints (0 = final checkpoint only)
checkpoint_every = {checkpoint_every}
"""


def default_config_text() -> str:
    cfg = RunConfig()
    return DEFAULT_TEMPLATE.format(
        nx=cfg.nx, nm=cfg.nm, nu=cfg.nu, kappa=cfg.kappa, delta=cfg.delta,
        b=cfg.b, alpha=cfg.alpha, p=cfg.p, q=cfg.q, coefficients=cfg.coefficients,
        scheme=cfg.scheme, dt=cfg.dt, t_end=cfg.t_end, cfl_safety=cfg.cfl_safety,
        diag_every=cfg.diag_every, adaptive=str(cfg.adaptive).lower(),
        mode=cfg.mode, picard_tol=cfg.picard_tol, picard_max_iter=cfg.picard_max_iter,
        velocity_amplitude=cfg.velocity_amplitude,
        perturbation_amplitude=cfg.perturbation_amplitude,
        f_amplitude=cfg.f_amplitude, seed=cfg.seed,
        directory=cfg.directory, checkpoint_every=cfg.checkpoint_every)


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.replace(";", ",").split(","))


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    try:
        g = parser["grid"]
        cfg.nx = g.getint("nx", cfg.nx)
        cfg.nm = g.getint("nm", cfg.nm)
        p = parser["params"]
        cfg.nu = p.getfloat("nu", cfg.nu)
        cfg.kappa = p.getfloat("kappa", cfg.kappa)
        cfg.delta = p.getfloat("delta", cfg.delta)
        cfg.b = p.getfloat("b", cfg.b)
        cfg.alpha = p.getfloat("alpha", cfg.alpha)
        cfg.p = p.getfloat("p", cfg.p)
        cfg.q = p.getfloat("q", cfg.q)
        cfg.coefficients = p.get("coefficients", cfg.coefficients).strip()
        cfg.kernel_cos = _floats(p.get("kernel_cos", ""))
        for name in ("c11", "c12", "c21", "c22"):
            if p.get(f"{name}_cos", "").strip():
                cfg.coeff_cos[name] = _floats(p.get(f"{name}_cos"))
            if p.get(f"{name}_sin", "").strip():
                cfg.coeff_sin[name] = _floats(p.get(f"{name}_sin"))
        s = parser["stepper"]
        cfg.scheme = s.get("scheme", cfg.scheme).strip()
        cfg.dt = s.getfloat("dt", cfg.dt)
        cfg.t_end = s.getfloat("t_end", cfg.t_end)
        cfg.cfl_safety = s.getfloat("cfl_safety", cfg.cfl_safety)
        cfg.diag_every = s.getint("diag_every", cfg.diag_every)
        cfg.adaptive = s.getboolean("adaptive", cfg.adaptive)
        if parser.has_section("solver"):
            cfg.mode = parser["solver"].get("mode", cfg.mode).strip()
        if parser.has_section("picard"):
            cfg.picard_tol = parser["picard"].getfloat("tol", cfg.picard_tol)
            cfg.picard_max_iter = parser["picard"].getint("max_iter", cfg.picard_max_iter)
        if parser.has_section("initial"):
            i = parser["initial"]
            cfg.velocity_amplitude = i.getfloat("velocity_amplitude", cfg.velocity_amplitude)
            cfg.perturbation_amplitude = i.getfloat("perturbation_amplitude", cfg.perturbation_amplitude)
            cfg.f_amplitude = i.getfloat("f_amplitude", cfg.f_amplitude)
            cfg.seed = i.getint("seed", cfg.seed)
        if parser.has_section("output"):
            o = parser["output"]
            cfg.directory = o.get("directory", cfg.directory).strip()
            cfg.checkpoint_every = o.getint("checkpoint_every", cfg.checkpoint_every)
    except (KeyError, ValueError) as err:
        raise ConfigError(f"malformed config: {err}") from err
    cfg.validate()
    return cfg


def write_default_config(path, force: bool = False) -> None:
    path = Path(path)
    if path.exists() and not force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")
    path.write_text(default_config_text())
