import numpy as np
import pytest

from hallmhd.spectral_core import SpectralField, get_grid, leray_project


def random_solenoidal(n, seed, kmax=None, ncomp=3):
    """Random real div-free field built from physical-space noise."""
    rng = np.random.default_rng(seed)
    grid = get_grid(n)
    f = SpectralField.from_physical(rng.standard_normal((ncomp,) + grid.shape), grid)
    mask = grid.dealias_mask if kmax is None else grid.dealias_mask & (grid.kmag <= kmax)
    f = f.multiply(mask)
    f = f._wrap(f.coeffs * (grid.k2 > 0))
    return leray_project(f) if ncomp == 3 else f


@pytest.fixture
def grid16():
    return get_grid(16)


@pytest.fixture
def grid32():
    return get_grid(32)
