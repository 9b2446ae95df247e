"""Ensemble runs, norm moments and tail estimates."""

import math

import numpy as np
import pytest

from hallmhd.ensemble_stats import (
    EnsembleConfig,
    InsufficientSamples,
    clopper_pearson,
    default_workers,
    ensemble_run,
    event_norms,
    free_evolution_norm_stats,
    moments_from_samples,
    second_moment_closed_form,
    tail_estimate,
    tail_from_samples,
)
from hallmhd.randomization import GAUSSIAN, RADEMACHER, power_law_field
from hallmhd.spectral_core import SpectralField, get_grid


def config(data=None, **kw):
    grid = get_grid(8)
    if data is None:
        data = power_law_field(grid, 0.5, shape_seed=2)
    kw.setdefault("n_draws", 200)
    kw.setdefault("nodes", 9)
    return EnsembleConfig(data=data, alpha=1.25, p=11, s=0.5, **kw)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            config(n_draws=0)
        with pytest.raises(ValueError):
            config(lambda_grid=[2.0, 1.0])
        with pytest.raises(ValueError):
            config(tail_norm=3)
        with pytest.raises(ValueError):
            EnsembleConfig(data=SpectralField.zeros(get_grid(8)), alpha=1.25, which="u")

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("HALLMHD_THREADS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("HALLMHD_THREADS", "many")
        assert default_workers() == 1

    def test_scaled_copy(self):
        cfg = config()
        assert cfg.scaled(2.0).data_norm == pytest.approx(2 * cfg.data_norm)


class TestEnsembleRun:
    def test_order_and_workers_do_not_matter(self):
        cfg = config(n_draws=12)
        a = ensemble_run(cfg, workers=1)
        b = ensemble_run(cfg, workers=3, order=list(reversed(range(12))))
        np.testing.assert_array_equal(a.matrix(), b.matrix())
        assert a.to_csv(cfg.labels) == b.to_csv(cfg.labels)

    def test_single_draw(self):
        cfg = config(n_draws=1)
        res = ensemble_run(cfg)
        assert res.n == 1 and res.matrix().shape == (1, 3)
        assert res.to_csv(cfg.labels).splitlines()[0] == "draw,seed,E1,E2,E3"

    def test_failures_are_recorded(self):
        cfg = config(n_draws=10)

        def flaky(c, seed):
            if seed % 3 == 0:
                raise FloatingPointError("overflow")
            return event_norms(c, seed)

        res = ensemble_run(cfg, task=flaky)
        bad = sum(1 for s in res.seeds if s % 3 == 0)
        assert len(res.failures) == bad
        assert res.failure_fraction == pytest.approx(bad / 10)
        assert res.matrix().shape[0] == 10 - bad

    def test_zero_data(self):
        cfg = config(data=SpectralField.zeros(get_grid(8)), n_draws=120)
        res = ensemble_run(cfg)
        assert not np.any(res.matrix())
        mom = free_evolution_norm_stats(cfg, result=res)
        assert not np.any(mom.moment)
        tail = tail_from_samples(res.matrix()[:, 0], [0.1, 0.2, 0.3])
        assert not np.any(tail.p_hat)

    def test_single_mode_rademacher_is_deterministic(self):
        data = SpectralField.from_modes(get_grid(8), {(1, 0, 1): [1, 0, -1]})
        cfg = config(data=data, distribution=RADEMACHER, n_draws=100)
        x = ensemble_run(cfg).matrix()
        np.testing.assert_allclose(x, np.broadcast_to(x[0], x.shape), rtol=1e-13)
        mom = moments_from_samples(x[:, 2], [2, 4, 8], cfg.data_norm)
        np.testing.assert_allclose(mom.moment, x[0, 2], rtol=1e-13)


class TestMoments:
    def test_second_moment_closed_form(self):
        cfg = config(distribution=GAUSSIAN, n_draws=2000)
        x = ensemble_run(cfg).matrix()[:, 2] ** 2
        se = x.std(ddof=1) / math.sqrt(x.size)
        assert abs(x.mean() - second_moment_closed_form(cfg)) <= 3 * se

    def test_gaussian_ratios_bounded(self):
        cfg = config(n_draws=1000)
        mom = free_evolution_norm_stats(cfg, r_list=[2, 4, 8, 16])
        assert mom.bounded(2.0)
        assert mom.to_csv().splitlines()[0] == "r,moment,ratio_sqrt_r"

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            moments_from_samples(np.ones(50), [2], 1.0)
        heavy = np.random.default_rng(0).pareto(1.5, 200)
        with pytest.raises(InsufficientSamples):
            moments_from_samples(heavy, [2, 32], 1.0)


class TestTail:
    def test_clopper_pearson_edges(self):
        lo, hi = clopper_pearson(np.array([0, 10]), 10)
        assert lo[0] == 0 and hi[0] == pytest.approx(1 - 0.025**0.1, rel=1e-9)
        assert hi[1] == 1 and lo[1] == pytest.approx(0.025**0.1, rel=1e-9)

    def test_interval_shrinks_like_root_n(self):
        lo1, hi1 = clopper_pearson(np.array([3000]), 10000)
        lo2, hi2 = clopper_pearson(np.array([6000]), 20000)
        assert (hi1 - lo1) / (hi2 - lo2) == pytest.approx(math.sqrt(2), rel=0.02)

    def test_gaussian_magnitude_decay(self):
        z = np.abs(np.random.default_rng(1).standard_normal(100_000))
        rep = tail_from_samples(z)
        assert rep.r2 >= 0.95
        assert -0.75 <= rep.slope <= -0.4
        assert np.all(np.diff(rep.p_hat) <= 0)

    def test_doubling_data_quarters_the_slope(self):
        z = np.abs(np.random.default_rng(2).standard_normal(20_000))
        a = tail_from_samples(z, data_norm=1.0)
        b = tail_from_samples(2 * z, data_norm=2.0)
        assert b.slope == pytest.approx(a.slope / 4, rel=1e-10)
        assert b.c2 == pytest.approx(a.c2, rel=1e-10)

    def test_needs_enough_draws(self):
        with pytest.raises(InsufficientSamples):
            tail_estimate(config(n_draws=500))

    def test_csv_header(self):
        rep = tail_from_samples(np.arange(1.0, 101.0), [10.0, 50.0])
        assert rep.to_csv().splitlines()[0] == "lambda,p_hat,ci_lo,ci_hi"
        assert rep.degenerate
