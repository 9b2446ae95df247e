"""Transforms, projections and norms checked against direct numpy evaluation."""

import itertools
import math

import numpy as np
import pytest

from hallmhd.spectral_core import (
    Grid,
    GridMismatchError,
    NormSpec,
    SpectralField,
    Trajectory,
    curl,
    dealias,
    divergence,
    get_grid,
    gradient,
    inner,
    inverse_transform,
    leray_project,
    lp_norm,
    sobolev_norm,
    transform,
    trapezoid_weights,
    weighted_spacetime_norm,
)

from conftest import random_solenoidal


def full_fft(values):
    """Reference coefficients a_k = mean(f e^{-ikx}) over the whole lattice."""
    return np.fft.fftn(values, axes=(-3, -2, -1)) / values.shape[-1] ** 3


class TestGrid:
    def test_rejects_odd_or_tiny(self):
        for n in (3, 7, 2, 0):
            with pytest.raises(ValueError):
                Grid(n)

    def test_dealias_examples(self):
        g = get_grid(12)
        k1, k2, k3 = g.wavenumbers
        mask = g.dealias_mask
        # N=12 keeps |k_i| <= 4 and drops 5
        assert mask[4, 0, 0] and mask[-4, 4, 4]
        assert not mask[5, 0, 0] and not mask[0, 0, 5]

    def test_multiplicity_counts_the_lattice(self):
        g = get_grid(8)
        # every non-Nyquist lattice point is represented exactly once
        assert g.multiplicity.sum() == 7**3

    def test_cached(self):
        assert get_grid(16) is get_grid(16)


class TestTransforms:
    def test_matches_numpy_fftn(self, grid16):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((3,) + grid16.shape)
        f = inverse_transform(v, grid16)
        ref = full_fft(v)[..., : grid16.n // 2 + 1] * grid16.keep_mask
        np.testing.assert_allclose(f.coeffs, ref, atol=1e-15)

    def test_round_trip_of_resolved_field(self, grid16):
        f = random_solenoidal(16, 1)
        back = inverse_transform(transform(f), grid16)
        np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-15)

    def test_single_mode_values(self, grid16):
        f = SpectralField.from_modes(grid16, {(1, 0, 0): [0, 0.5, 0]})
        x, y, z = grid16.points()
        np.testing.assert_allclose(transform(f)[1], np.cos(x), atol=1e-14)
        assert f.is_hermitian() and f.is_div_free() and f.is_zero_mean

    def test_nyquist_zeroed(self, grid16):
        rng = np.random.default_rng(2)
        f = inverse_transform(rng.standard_normal(grid16.shape), grid16)
        assert np.all(f.coeffs[:, 8] == 0) and np.all(f.coeffs[..., 8] == 0)

    def test_mode_outside_lattice_rejected(self, grid16):
        with pytest.raises(ValueError):
            SpectralField.from_modes(grid16, {(8, 0, 0): [0, 1, 0]})

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            SpectralField.zeros(get_grid(8)) + SpectralField.zeros(get_grid(16))


class TestOperators:
    def test_leray_against_per_mode_matrix(self):
        g = get_grid(8)
        rng = np.random.default_rng(3)
        f = inverse_transform(rng.standard_normal((3,) + g.shape), g)
        p = leray_project(f)
        k = g.k_vector
        for idx in itertools.product(range(8), range(8), range(5)):
            kv = k[(slice(None),) + idx]
            a = f.coeffs[(slice(None),) + idx]
            if kv @ kv == 0:
                expect = a
            else:
                expect = (np.eye(3) - np.outer(kv, kv) / (kv @ kv)) @ a
            np.testing.assert_allclose(p.coeffs[(slice(None),) + idx], expect, atol=1e-15)

    def test_leray_idempotent_and_divergence_free(self, grid16):
        rng = np.random.default_rng(4)
        f = inverse_transform(rng.standard_normal((3,) + grid16.shape), grid16)
        p = leray_project(f)
        assert p.is_div_free()
        np.testing.assert_allclose(leray_project(p).coeffs, p.coeffs, atol=1e-15)

    def test_curl_of_shear(self, grid16):
        # u = (sin y, 0, 0) so curl u = (0, 0, -cos y)
        x, y, z = grid16.points()
        u = inverse_transform(np.stack([np.sin(y), 0 * y, 0 * y]), grid16)
        w = transform(curl(u))
        np.testing.assert_allclose(w[2], -np.cos(y), atol=1e-13)
        np.testing.assert_allclose(w[:2], 0, atol=1e-13)

    def test_curl_of_gradient_and_div_of_curl(self, grid16):
        rng = np.random.default_rng(5)
        phi = inverse_transform(rng.standard_normal(grid16.shape), grid16)
        assert np.max(np.abs(curl(gradient(phi)).coeffs)) < 1e-12
        v = inverse_transform(rng.standard_normal((3,) + grid16.shape), grid16)
        assert np.max(np.abs(divergence(curl(v)).coeffs)) < 1e-12

    def test_dealias_flag(self, grid16):
        rng = np.random.default_rng(6)
        f = inverse_transform(rng.standard_normal((3,) + grid16.shape), grid16)
        assert not f.is_dealiased()
        assert dealias(f).is_dealiased()


class TestNorms:
    def test_sobolev_against_full_lattice_sum(self, grid16):
        rng = np.random.default_rng(7)
        v = rng.standard_normal((3,) + grid16.shape)
        f = inverse_transform(v, grid16)
        a = full_fft(transform(f))
        k = np.fft.fftfreq(16, 1 / 16)
        k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
        for sigma in (0.0, 1.0, 2.5, -1.0):
            ref = math.sqrt(np.sum((1 + k2) ** sigma * np.sum(np.abs(a) ** 2, axis=0)))
            assert sobolev_norm(f, sigma) == pytest.approx(ref, rel=1e-12)

    def test_parseval(self, grid16):
        f = random_solenoidal(16, 8)
        assert sobolev_norm(f, 0) == pytest.approx(lp_norm(f, 2), rel=1e-12)
        assert inner(f, f) == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-12)

    def test_lp_of_constant_modulus_field(self, grid16):
        # (cos z, sin z, 0) has |f| = 1 everywhere
        x, y, z = grid16.points()
        f = inverse_transform(np.stack([np.cos(z), np.sin(z), 0 * z]), grid16)
        for p in (1, 2, 6, 12, math.inf):
            assert lp_norm(f, p) == pytest.approx(1.0, rel=1e-12)

    def test_lp_rejects_small_exponent(self, grid16):
        with pytest.raises(ValueError):
            lp_norm(SpectralField.zeros(grid16), 0.5)

    def test_lp_monotone_in_p(self):
        f = random_solenoidal(16, 9)
        vals = [lp_norm(f, p) for p in (1, 2, 4, 8, math.inf)]
        assert np.all(np.diff(vals) >= -1e-14)


class TestSpaceTime:
    def test_trapezoid_weights(self):
        t = np.array([0.1, 0.2, 0.5])
        np.testing.assert_allclose(trapezoid_weights(t), [0.15, 0.2, 0.15])
        assert trapezoid_weights(np.linspace(0, 2, 9)).sum() == pytest.approx(2.0)

    def test_static_field_closed_form(self, grid16):
        # ||t^r f||_{L^s} over [0, T] equals ||f|| (T^{rs+1}/(rs+1))^{1/s}
        f = random_solenoidal(16, 10)
        times = np.linspace(0, 1, 2001)
        traj = Trajectory.from_fields(times, [f] * times.size)
        base = sobolev_norm(f, 1.0)
        spec = NormSpec.spacetime(0.5, 2, sigma=1.0)
        assert weighted_spacetime_norm(traj, spec) == pytest.approx(base * 0.5**0.5, rel=1e-6)
        sup = NormSpec.spacetime(0.0, math.inf, sigma=1.0)
        assert weighted_spacetime_norm(traj, sup) == pytest.approx(base, rel=1e-14)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            NormSpec.spacetime(0.1, 2)
        with pytest.raises(ValueError):
            NormSpec.spacetime(-0.1, 2, p=2)
        with pytest.raises(ValueError):
            NormSpec.lebesgue(0.5)

    def test_trajectory_validation(self, grid16):
        with pytest.raises(ValueError):
            Trajectory.zeros(grid16, [0.2, 0.1])
        a = Trajectory.zeros(grid16, [0.0, 1.0])
        b = Trajectory.zeros(grid16, [0.0, 2.0])
        with pytest.raises(ValueError):
            a + b
