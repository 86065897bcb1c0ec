import numpy as np
import pytest

from nsfp import (
    CircleGrid,
    DistributionField,
    InteractionKernel,
    ModelParams,
    PicardConfig,
    PicardDivergence,
    State,
    StepperConfig,
    VelocityField,
    cfl_dt,
    imex_step,
    picard_step,
    rod_coefficients,
    run_simulation,
    standard_initial_data,
    taylor_green,
)
from nsfp.circle import RodCoefficients
from nsfp.stepping import NumericalAbort


def state_distance(a, b):
    g = a.f.grid
    du = ((a.u.u1.values - b.u.u1.values) ** 2
          + (a.u.u2.values - b.u.u2.values) ** 2).sum() * g.cell_area
    df = ((a.f.values - b.f.values) ** 2).sum() * g.cell_area * a.f.circle.weight
    return float(np.sqrt(du + df))


@pytest.fixture(scope="module")
def decoupled_params():
    circle = CircleGrid(32)
    return ModelParams(nu=0.1, kappa=0.1, kernel=InteractionKernel(0.0),
                       coeffs=RodCoefficients.zero(circle))


class TestImexStep:
    def test_rest_state_is_fixed_point(self, grid32, circle32, default_params):
        st = State(0.0, VelocityField.zeros(grid32),
                   DistributionField.uniform(grid32, circle32))
        cfg = StepperConfig(dt=1e-3, t_end=1.0)
        out = imex_step(st, default_params, cfg)
        assert np.abs(out.f.values - st.f.values).max() < 1e-14
        assert np.abs(out.u.u1.values).max() < 1e-14

    def test_taylor_green_exact_decay(self, grid32, circle32, decoupled_params):
        # stress forced to zero (zero coefficients): the cell decays on its
        # exact viscous envelope, and the integrating factor reproduces it
        th = circle32.nodes
        fv = np.broadcast_to((1 + 0.1 * np.cos(th)) / (2 * np.pi), (32, 32, 32)).copy()
        st = State(0.0, taylor_green(grid32, 1.0), DistributionField(grid32, circle32, fv))
        cfg = StepperConfig(dt=1e-3, t_end=1.0, scheme="if_rk2")
        for _ in range(100):
            st = imex_step(st, decoupled_params, cfg)
        decay = np.exp(-2 * 0.1 * 0.1)
        ref = taylor_green(grid32, decay)
        assert np.abs(st.u.u1.values - ref.u1.values).max() < 1e-12

    def test_circle_mode_exact_decay(self, grid32, circle32, decoupled_params):
        th = circle32.nodes
        eps = 0.1
        fv = np.broadcast_to((1 + eps * np.cos(th)) / (2 * np.pi), (32, 32, 32)).copy()
        st = State(0.0, VelocityField.zeros(grid32), DistributionField(grid32, circle32, fv))
        cfg = StepperConfig(dt=1e-3, t_end=1.0, scheme="if_rk2")
        for _ in range(50):
            st = imex_step(st, decoupled_params, cfg)
        amp = np.fft.rfft(st.f.values[0, 0])[1].real * 2 / 32
        expect = eps / (2 * np.pi) * np.exp(-0.1 * 0.05)
        assert abs(amp - expect) < 1e-15

    @pytest.mark.parametrize("scheme,order", [("imex_euler", 1.0), ("if_rk2", 2.0)])
    def test_temporal_self_convergence(self, grid32, circle32, default_params, scheme, order):
        init = standard_initial_data(grid32, circle32, 1.0, 0.0, 0.2, seed=2)
        T = 0.04
        finals = {}
        for dt in (4e-3, 2e-3, 1e-3):
            cfg = StepperConfig(dt=dt, t_end=T, scheme=scheme)
            s = init
            for _ in range(int(round(T / dt))):
                s = imex_step(s, default_params, cfg)
            finals[dt] = s
        e1 = state_distance(finals[4e-3], finals[2e-3])
        e2 = state_distance(finals[2e-3], finals[1e-3])
        slope = np.log2(e1 / e2)
        assert abs(slope - order) < 0.3

    def test_nan_guard(self, grid32, circle32, default_params):
        bad = np.full((32, 32, 32), 1 / (2 * np.pi))
        bad[0, 0, 0] = np.nan
        st = State(0.0, VelocityField.zeros(grid32),
                   DistributionField(grid32, circle32, bad))
        with pytest.raises(NumericalAbort):
            imex_step(st, default_params, StepperConfig(dt=1e-3, t_end=1.0))

    def test_mass_and_divergence_preserved(self, default_params, developed_state):
        cfg = StepperConfig(dt=1e-3, t_end=1.0)
        st = developed_state
        mass0 = st.f.total_mass()
        for _ in range(20):
            st = imex_step(st, default_params, cfg)
        assert abs(st.f.total_mass() - mass0) < 1e-11
        assert st.u.divergence_max() < 1e-12


class TestPicardStep:
    def test_rest_state_one_iteration(self, grid32, circle32, default_params):
        st = State(0.0, VelocityField.zeros(grid32),
                   DistributionField.uniform(grid32, circle32))
        cfg = StepperConfig(dt=1e-3, t_end=1.0)
        out, iters, ratios = picard_step(st, default_params, cfg, PicardConfig())
        assert iters == 1
        assert ratios == []
        assert np.abs(out.f.values - st.f.values).max() < 1e-14

    def test_geometric_contraction(self, grid32, circle32, developed_state):
        params = ModelParams(nu=0.1, kappa=0.1, delta=0.1,
                             kernel=InteractionKernel(0.5),
                             coeffs=rod_coefficients(circle32))
        cfg = StepperConfig(dt=1e-3, t_end=1.0)
        out, iters, ratios = picard_step(developed_state, params, cfg, PicardConfig())
        assert iters <= 10
        assert all(r < 0.5 for r in ratios)

    def test_consistency_with_imex_under_refinement(self, circle32, default_params, developed_state):
        cfg = StepperConfig(dt=1e-3, t_end=1.0, scheme="imex_euler")
        pc = PicardConfig()
        diffs = []
        for dt in (2e-3, 1e-3, 5e-4):
            a = imex_step(developed_state, default_params, cfg, dt=dt)
            b, _, _ = picard_step(developed_state, default_params, cfg, pc, dt=dt)
            diffs.append(state_distance(a, b))
        slopes = [np.log2(diffs[i] / diffs[i + 1]) for i in range(2)]
        assert all(s > 1.7 for s in slopes)

    def test_divergence_reported_with_trace(self, grid32, circle32, default_params, developed_state):
        cfg = StepperConfig(dt=1.0, t_end=10.0)  # grossly too large
        with pytest.raises(PicardDivergence) as err:
            picard_step(developed_state, default_params, cfg,
                        PicardConfig(tol=1e-14, max_iter=8))
        assert len(err.value.ratios) > 0


class TestCflDt:
    def test_rest_returns_configured(self, grid32, circle32, default_params):
        st = State(0.0, VelocityField.zeros(grid32),
                   DistributionField.uniform(grid32, circle32))
        cfg = StepperConfig(dt=5e-3, t_end=1.0)
        assert cfl_dt(st, default_params, cfg) == 5e-3

    def test_halves_when_speed_doubles(self, grid32, circle32, default_params):
        cfg = StepperConfig(dt=1.0, t_end=1.0)  # large so advection binds
        st1 = State(0.0, taylor_green(grid32, 1.0),
                    DistributionField.uniform(grid32, circle32))
        st2 = State(0.0, taylor_green(grid32, 2.0),
                    DistributionField.uniform(grid32, circle32))
        d1 = cfl_dt(st1, default_params, cfg)
        d2 = cfl_dt(st2, default_params, cfg)
        assert d2 <= d1 / 2 + 1e-15

    def test_shear_angular_constraint(self, grid32, circle32, default_params):
        # u = (gamma x2, 0)-like shear via sin(y): max|W| = gamma at the
        # crest, so the angular bound is safety * dtheta / gamma
        from nsfp.spectral2d import ScalarField2D

        gamma = 4.0
        u1 = ScalarField2D.from_function(grid32, lambda x, y: (gamma / 1.0) * np.sin(y))
        st = State(0.0, VelocityField(u1, ScalarField2D.zeros(grid32)),
                   DistributionField.uniform(grid32, circle32))
        cfg = StepperConfig(dt=10.0, t_end=1.0, cfl_safety=0.5)
        expect = 0.5 * circle32.weight / gamma  # angular constraint binds
        assert cfl_dt(st, default_params, cfg) == pytest.approx(expect, rel=1e-12)


class TestRunSimulation:
    def test_t_end_zero_returns_initial(self, grid32, circle32, default_params):
        init = standard_initial_data(grid32, circle32, 1.0, 0.0, 0.1, seed=0)
        final, records = run_simulation(default_params, init,
                                        StepperConfig(dt=1e-3, t_end=0.0))
        assert final is init
        assert len(records) == 1
        assert records[0].t == 0.0

    def test_short_run_health(self, grid32, circle32, default_params):
        init = standard_initial_data(grid32, circle32, 1.0, 0.0, 0.1, seed=0)
        final, records = run_simulation(default_params, init,
                                        StepperConfig(dt=1e-3, t_end=0.05, diag_every=10))
        assert len(records) == 6
        assert final.t == pytest.approx(0.05)
        for r in records:
            for name in ("kinetic_energy", "free_energy_total", "tau_grad_accum",
                         "fgrad_accum", "log_bound_ratio", "balance_residual"):
                assert np.isfinite(getattr(r, name))
        accum_t = [r.tau_grad_accum for r in records]
        accum_f = [r.fgrad_accum for r in records]
        assert all(b >= a - 1e-15 for a, b in zip(accum_t, accum_t[1:]))
        assert all(b >= a - 1e-15 for a, b in zip(accum_f, accum_f[1:]))

    def test_decoupled_run_matches_decay_rates(self, grid32, circle32, decoupled_params):
        th = circle32.nodes
        fv = np.broadcast_to((1 + 0.1 * np.cos(th)) / (2 * np.pi), (32, 32, 32)).copy()
        init = State(0.0, taylor_green(grid32, 1.0),
                     DistributionField(grid32, circle32, fv))
        final, _ = run_simulation(decoupled_params, init,
                                  StepperConfig(dt=1e-3, t_end=0.1, diag_every=100))
        ref = np.exp(-0.2 * 0.1)
        rel_u = np.abs(final.u.u1.values - ref * init.u.u1.values).max() / ref
        assert rel_u < 1e-12

    def test_picard_solver_path(self, grid32, circle32, default_params):
        init = standard_initial_data(grid32, circle32, 1.0, 0.0, 0.1, seed=0)
        final, records = run_simulation(default_params, init,
                                        StepperConfig(dt=1e-3, t_end=0.01, diag_every=5),
                                        solver="picard")
        assert final.t == pytest.approx(0.01)
        assert all(np.isfinite(r.kinetic_energy) for r in records)

    def test_rejects_bad_initial_data(self, grid32, circle32, default_params):
        init = standard_initial_data(grid32, circle32, 1.0, 0.0, 0.1, seed=0)
        bad = State(0.0, init.u, DistributionField(grid32, circle32, init.f.values * 2.0))
        with pytest.raises(ValueError):
            run_simulation(default_params, bad, StepperConfig(dt=1e-3, t_end=0.01))

    def test_adaptive_mode_respects_cfl(self, grid32, circle32, default_params):
        init = standard_initial_data(grid32, circle32, 2.0, 0.0, 0.1, seed=0)
        cfg = StepperConfig(dt=0.5, t_end=0.2, diag_every=1, adaptive=True, cfl_safety=0.4)
        final, records = run_simulation(default_params, init, cfg)
        assert final.t == pytest.approx(0.2)
        steps = np.diff([r.t for r in records])
        bound = 0.4 * grid32.spacing / 2.0  # initial advective constraint
        assert steps.max() <= bound * 1.5   # speed decays, bound relaxes

    def test_fixed_dt_cfl_warning(self, grid32, circle32, default_params):
        init = standard_initial_data(grid32, circle32, 2.0, 0.0, 0.1, seed=0)
        cfg = StepperConfig(dt=0.2, t_end=0.4, diag_every=1)
        with pytest.warns(RuntimeWarning, match="CFL"):
            run_simulation(default_params, init, cfg)


class TestConfigValidation:
    def test_stepper_rejects_bad(self):
        with pytest.raises(ValueError):
            StepperConfig(dt=0.0, t_end=1.0)
        with pytest.raises(ValueError):
            StepperConfig(dt=1e-3, t_end=1.0, scheme="rk7")
        with pytest.raises(ValueError):
            StepperConfig(dt=1e-3, t_end=1.0, cfl_safety=0.0)

    def test_picard_rejects_bad(self):
        with pytest.raises(ValueError):
            PicardConfig(tol=0.0)
        with pytest.raises(ValueError):
            PicardConfig(max_iter=0)
