"""Pseudospectral solver for 2D incompressible flow coupled to an
orientation Fokker-Planck equation, with a priori diagnostics and a
frequency-shell inequality lab."""

from .circle import CircleGrid, InteractionKernel, RodCoefficients, rod_coefficients
from .coupled import (
    DistributionField,
    ModelParams,
    State,
    compute_stress,
    compute_W,
    dissipation,
    free_energy,
    fp_rhs,
    kinetic_energy,
    ns_rhs,
    pressure,
    standard_initial_data,
    taylor_green,
)
from .diagnostics import DiagnosticsRecord, MonitorConfig
from .spectral2d import (
    GridSpec2D,
    ScalarField2D,
    StressField,
    VelocityField,
    apply_H,
    besov_norm,
    derivative,
    heat_propagate,
    inverse_neg_laplacian,
    leray_project,
    lp_block,
    lq_norm,
    mollify,
    riesz,
)
from .stepping import (
    NumericalAbort,
    PicardConfig,
    PicardDivergence,
    StepperConfig,
    cfl_dt,
    imex_step,
    picard_step,
    run_simulation,
)

__version__ = "0.1.0"
