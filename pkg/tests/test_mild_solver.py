"""Exponent relations, product integration, Picard iteration and the reference integrator."""

import math
import warnings

import numpy as np
import pytest

from hallmhd.dynamics import ELECTRON_MHD, HALL_MHD, HEAT, PreconditionError, SystemKind
from hallmhd.mild_solver import (
    BETA_RELATION,
    GAMMA_RELATION,
    BlowUpError,
    InfeasibleParameters,
    PicardConvergenceError,
    SolverConfig,
    auto_exponent,
    contraction_probe,
    contraction_study,
    duhamel_apply,
    duhamel_integral,
    etd_integrate,
    free_evolution,
    magnetic_threshold,
    parameter_feasibility,
    phi_functions,
    picard_solve,
    random_perturbation,
    time_nodes,
    trajectory_norm,
    y_norm_specs,
)
from hallmhd.randomization import GAUSSIAN, draw, power_law_field, randomize
from hallmhd.spectral_core import SpectralField, Trajectory, get_grid, inverse_transform, sobolev_norm

EMHD = SystemKind(ELECTRON_MHD, 1.25)


def small_data(n=16, amplitude=1e-2, seed=1):
    grid = get_grid(n)
    return randomize(power_law_field(grid, 0.5, amplitude), draw(seed, GAUSSIAN, grid))


def emhd_config(amplitude=1e-2, **kw):
    kw.setdefault("nodes", 17)
    kw.setdefault("first_node", 1e-3)
    return SolverConfig(EMHD, 16, 0.05, p=11, B_data=small_data(16, amplitude), **kw)


def beltrami(grid, m=2):
    """(sin mz, cos mz, 0): curl B = m B, so the Hall term vanishes identically."""
    return SpectralField.from_modes(grid, {(0, 0, m): [-0.5j, 0.5, 0]})


class TestFeasibility:
    def test_magnetic_weight_example(self):
        feas = parameter_feasibility(1.25, p=12)
        assert feas.beta == pytest.approx(0.05, abs=1e-15)
        assert feas.eta_window == pytest.approx((0.3, 0.4))
        assert feas.eta == pytest.approx(0.35)

    def test_velocity_weight_example(self):
        assert parameter_feasibility(1.0, q=6).gamma == pytest.approx(0.125, abs=1e-15)

    def test_time_integrability_warning(self):
        assert parameter_feasibility(1.25, p=12).warnings
        assert not parameter_feasibility(1.25, p=11).warnings

    def test_auto_exponent(self):
        assert auto_exponent(1.25, "p") == 11
        feas = parameter_feasibility(1.25, p=auto_exponent(1.25, "p"))
        assert 1 / (2 * feas.beta) >= feas.p

    def test_unit_order_magnetic_infeasible(self):
        with pytest.raises(InfeasibleParameters) as err:
            parameter_feasibility(1.0, p=12)
        assert err.value.relation == BETA_RELATION
        with pytest.raises(InfeasibleParameters):
            auto_exponent(1.0, "p")

    def test_small_q_infeasible(self):
        with pytest.raises(InfeasibleParameters) as err:
            parameter_feasibility(1.0, q=2)
        assert err.value.relation == GAMMA_RELATION

    def test_thresholds(self):
        assert magnetic_threshold(1.25) == pytest.approx(0.5)
        assert magnetic_threshold(1.0) == pytest.approx(1.5)


class TestConfig:
    def test_time_nodes(self):
        t = time_nodes(0.05, 5, first=1e-2)
        assert t[0] == 0 and t[-1] == 0.05 and t[1] == pytest.approx(5e-4)
        np.testing.assert_allclose(time_nodes(1.0, 5, "uniform"), np.linspace(0, 1, 5))
        with pytest.raises(ValueError):
            time_nodes(1.0, 1)

    def test_defaults_to_zero_data(self):
        cfg = SolverConfig(EMHD, 16, 0.05, p=11)
        assert not np.any(cfg.B_data.coeffs)

    def test_rejects_rough_data_claim(self):
        with pytest.raises(ValueError):
            SolverConfig(EMHD, 16, 0.05, p=11, s_B=0.4)

    def test_rejects_compressible_data(self):
        grid = get_grid(16)
        f = inverse_transform(np.random.default_rng(0).standard_normal((3,) + grid.shape), grid)
        with pytest.raises(PreconditionError):
            SolverConfig(EMHD, 16, 0.05, p=11, B_data=f)

    def test_rejects_heat(self):
        with pytest.raises(ValueError):
            SolverConfig(SystemKind(HEAT, 1.0), 16, 0.05)

    def test_warns_on_time_integrability(self):
        with pytest.warns(UserWarning):
            SolverConfig(EMHD, 16, 0.05, p=12)


class TestProductIntegration:
    def test_phi_limits_and_branch_continuity(self):
        z = np.array([0.0, 0.1 - 1e-12, 0.1 + 1e-12, 5.0])
        p1, p2 = phi_functions(z)
        assert p1[0] == pytest.approx(1.0) and p2[0] == pytest.approx(0.5)
        assert p1[1] == pytest.approx(p1[2], rel=1e-10)
        assert p2[1] == pytest.approx(p2[2], rel=1e-10)
        assert p1[3] == pytest.approx((1 - math.exp(-5)) / 5, rel=1e-14)
        assert p2[3] == pytest.approx((5 - 1 + math.exp(-5)) / 25, rel=1e-14)

    def test_constant_source_is_exact(self):
        grid = get_grid(16)
        f = beltrami(grid, 3)
        times = time_nodes(0.1, 9, first=1e-2)
        src = Trajectory.from_fields(times, [f] * times.size)
        out = duhamel_integral(src, 1.25)
        L = 9**1.25
        for j, t in enumerate(times):
            np.testing.assert_allclose(out[j].coeffs, f.coeffs * (1 - math.exp(-t * L)) / L,
                                       rtol=1e-12, atol=1e-18)

    def test_quadratic_source_second_order(self):
        grid = get_grid(16)
        f = beltrami(grid, 2)
        L, T = 4**1.25, 1.0
        exact = T**2 / L - 2 * T / L**2 + 2 / L**3 - 2 * math.exp(-T * L) / L**3
        errs = []
        for m in (10, 20, 40, 80):
            times = np.linspace(0, T, m + 1)
            src = Trajectory(grid, times, times[:, None, None, None, None] ** 2 * f.coeffs[None])
            got = duhamel_integral(src, 1.25)[-1].coeffs[1, 0, 0, 2]
            errs.append(abs(got - exact * f.coeffs[1, 0, 0, 2]))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        np.testing.assert_allclose(orders, 2.0, atol=0.1)

    def test_zero_candidate_and_data(self):
        cfg = SolverConfig(EMHD, 16, 0.05, p=11, nodes=9)
        V, H = duhamel_apply(cfg)
        assert V is None and not np.any(H.coeffs)

    def test_node_mismatch(self):
        cfg = emhd_config()
        wrong = Trajectory.zeros(cfg.grid, np.linspace(0, 0.05, 5))
        with pytest.raises(ValueError):
            duhamel_apply(cfg, wrong)


class TestPicard:
    def test_zero_data(self):
        res = picard_solve(SolverConfig(EMHD, 16, 0.05, p=11, nodes=9))
        assert res.report.iterations == 1 and res.report.converged
        assert not np.any(res.H.coeffs)

    def test_small_data_converges_to_fixed_point(self):
        cfg = emhd_config()
        res = picard_solve(cfg)
        rep = res.report
        assert rep.converged and rep.rho < 1
        specs = y_norm_specs(cfg.feasibility)
        _, again = duhamel_apply(cfg, res.H, free_B=res.free_B)
        assert trajectory_norm(again - res.H, specs) <= 1e-9 * trajectory_norm(res.H, specs)

    def test_matches_reference_integrator(self):
        cfg = emhd_config(nodes=65)
        res = picard_solve(cfg)
        _, ref = etd_integrate(cfg, dt=1e-4)
        err = sobolev_norm((res.B - ref)[-1], 1.0) / sobolev_norm(ref[-1], 1.0)
        assert err <= 1e-5

    def test_rate_grows_with_amplitude(self):
        rhos = [picard_solve(emhd_config(a)).report.rho for a in (5e-3, 1e-2, 2e-2)]
        assert rhos[0] < rhos[1] < rhos[2] < 1

    def test_iteration_cap(self):
        with pytest.raises(PicardConvergenceError) as err:
            picard_solve(emhd_config(max_iterations=2))
        assert err.value.history.size == 2

    def test_divergence_reported(self):
        with pytest.raises(PicardConvergenceError):
            picard_solve(emhd_config(amplitude=50.0, max_iterations=40))

    def test_report_constants(self):
        rep = picard_solve(emhd_config()).report
        assert 3 * rep.C * rep.lambda_bar == pytest.approx(1.0)
        assert rep.ball_radius == pytest.approx(2 / (9 * rep.C))
        head = rep.to_csv().splitlines()[0]
        assert head == "iter,residual_Y,ratio,C_fit,lambda_bar,ball_radius"

    def test_frozen_velocity_reduces_to_electron_mhd(self):
        B = small_data()
        kw = dict(nodes=17, first_node=1e-3)
        e = picard_solve(SolverConfig(EMHD, 16, 0.05, p=11, B_data=B, **kw))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            h = picard_solve(SolverConfig(SystemKind(HALL_MHD, 1.25), 16, 0.05, p=11, q=8,
                                          B_data=B, evolve_velocity=False, **kw))
        scale = np.max(np.abs(e.H.coeffs))
        assert np.max(np.abs(h.H.coeffs - e.H.coeffs)) <= 1e-10 * scale
        assert not np.any(h.V.coeffs)


class TestReferenceIntegrator:
    def test_manufactured_forcing_second_order(self):
        grid = get_grid(16)
        m = beltrami(grid, 2)
        L = 4**1.25
        a = lambda t: math.cos(3 * t) + 0.5
        da = lambda t: -3 * math.sin(3 * t)
        cfg = SolverConfig(EMHD, 16, 1.0, p=11, B_data=m * a(0.0))
        forcing = lambda t: (None, m.coeffs * (da(t) + L * a(t)))
        errs = []
        for steps in (10, 20, 40, 80):
            _, tB = etd_integrate(cfg, dt=1.0 / steps, times=[1.0], forcing=forcing)
            errs.append(np.max(np.abs(tB[0].coeffs - a(1.0) * m.coeffs)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        np.testing.assert_allclose(orders, 2.0, atol=0.2)

    def test_inactive_nonlinearity_matches_free_evolution(self):
        grid = get_grid(16)
        f = beltrami(grid, 1) * 0.3
        cfg = SolverConfig(EMHD, 16, 0.05, p=11, B_data=f, nodes=9)
        _, tB = etd_integrate(cfg, dt=1e-3)
        free = free_evolution(f, 1.25, cfg.times)
        np.testing.assert_allclose(tB.coeffs, free.coeffs, atol=1e-13)

    def test_blow_up_guard(self):
        grid = get_grid(16)
        m = beltrami(grid, 1)
        cfg = SolverConfig(EMHD, 16, 1.0, p=11, B_data=m)
        forcing = lambda t: (None, m.coeffs * 100.0)
        with pytest.raises(BlowUpError) as err:
            etd_integrate(cfg, dt=0.01, times=[1.0], forcing=forcing, guard=2.0)
        assert 0 < err.value.time < 1.0


class TestContraction:
    def test_identical_pair_skipped(self):
        cfg = emhd_config()
        H = random_perturbation(cfg, 1e-2, 3)
        assert contraction_probe(cfg, H, H).degenerate
        study = contraction_study(cfg, pairs=[(H, H), (H, H * 0.5)])
        assert study.skipped == 1 and len(study.probes) == 1

    def test_constant_is_stable_across_pairs(self):
        study = contraction_study(emhd_config(), n_pairs=6, seed=1)
        assert study.dispersion <= 0.5
        assert 3 * study.C * study.lambda_bar == pytest.approx(1.0)

    def test_only_electron_mhd(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = SolverConfig(SystemKind(HALL_MHD, 1.25), 16, 0.05, p=11, q=8, nodes=9)
        H = Trajectory.zeros(cfg.grid, cfg.times)
        with pytest.raises(ValueError):
            contraction_probe(cfg, H, H)
