import numpy as np
import pytest

from nsfp import (
    CircleGrid,
    GridSpec2D,
    InteractionKernel,
    ModelParams,
    StepperConfig,
    imex_step,
    rod_coefficients,
    standard_initial_data,
)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec2D(32)


@pytest.fixture(scope="session")
def circle32():
    return CircleGrid(32)


@pytest.fixture(scope="session")
def default_params(circle32):
    return ModelParams(nu=0.1, kappa=0.1, kernel=InteractionKernel(b=0.5),
                       coeffs=rod_coefficients(circle32))


@pytest.fixture(scope="session")
def developed_state(grid32, circle32, default_params):
    """A coupled state integrated away from the initial data, so stress,
    drift and gradients are all active."""
    state = standard_initial_data(grid32, circle32, velocity_amplitude=1.0,
                                  perturbation_amplitude=0.2, f_amplitude=0.3, seed=3)
    cfg = StepperConfig(dt=1e-3, t_end=1.0)
    for _ in range(100):
        state = imex_step(state, default_params, cfg)
    return state


def random_band_limited(grid, seed=0, band=8):
    """Real mean-zero field with spectrum confined to |k_i| <= band."""
    rng = np.random.default_rng(seed)
    spec = np.zeros((grid.nx, grid.nx), dtype=complex)
    for k1 in range(-band, band + 1):
        for k2 in range(-band, band + 1):
            if k1 == 0 and k2 == 0:
                continue
            c = rng.standard_normal() + 1j * rng.standard_normal()
            spec[k1, k2] += c
            spec[-k1, -k2] += np.conj(c)
    from nsfp import ScalarField2D

    return ScalarField2D.from_spectral(grid, spec * grid.nx ** 2 / (2 * band + 1) ** 2)
