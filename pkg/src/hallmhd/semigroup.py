"""Fractional heat semigroup exp(-t(-Delta)^alpha) and its kernel estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .spectral_core import SpectralField, Trajectory

__all__ = [
    "KernelQuery",
    "propagate",
    "propagator",
    "kernel_norm",
    "kernel_norm_closed_form",
    "lattice_kernel_norm",
    "kernel_exponent",
    "beta_time_integral",
]


def propagator(grid, t: float, alpha: float) -> np.ndarray:
    """Fourier multiplier exp(-t |k|^(2 alpha))."""
    return np.exp(-t * grid.fractional_symbol(alpha))


def propagate(field: SpectralField, t: float, alpha: float) -> SpectralField:
    """Apply the semigroup for time ``t`` (coefficient-wise a_k -> e^{-t|k|^{2a}} a_k)."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    if t == 0:
        return field
    return field.multiply(propagator(field.grid, t, alpha))


def free_trajectory(data: SpectralField, alpha: float, times) -> Trajectory:
    times = np.asarray(times, float)
    if times.size and times[0] < 0:
        raise ValueError("semigroup time must be nonnegative")
    sym = data.grid.fractional_symbol(alpha)
    coeffs = np.exp(-times[:, None, None, None, None] * sym) * data.coeffs[None]
    return Trajectory(data.grid, times, coeffs)


@dataclass(frozen=True)
class KernelQuery:
    """Parameters of ||exp(-t|xi|^{2 alpha}) |xi|^m||_{L^p(R^n)}."""

    alpha: float
    m: float
    p: float
    t: float
    n: int = 3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if self.p * self.m <= -self.n:
            raise ValueError(
                f"divergent kernel integral: p*m = {self.p * self.m} <= -n = {-self.n}"
            )


def kernel_exponent(alpha: float, m: float, p: float, n: int = 3) -> float:
    """Power of t in the kernel estimate: -m/(2 alpha) - n/(2 p alpha)."""
    return -m / (2 * alpha) - n / (2 * p * alpha)


def _sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def kernel_norm(q: KernelQuery) -> float:
    """Radial adaptive quadrature of the kernel L^p norm over R^n."""
    a = q.p * q.t
    e = q.p * q.m + q.n - 1

    def integrand(r):
        return r**e * math.exp(-a * r ** (2 * q.alpha))

    # split at the decay scale so both pieces are well resolved
    r0 = a ** (-1.0 / (2 * q.alpha))
    peak = r0 * max(e / (2 * q.alpha), 1e-3) ** (1.0 / (2 * q.alpha))
    cuts = sorted({peak, 4 * max(peak, r0)})
    total, lo = 0.0, 0.0
    for hi in cuts:
        v, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)
        total += v
        lo = hi
    v, _ = integrate.quad(integrand, lo, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    total += v
    return (_sphere_area(q.n) * total) ** (1.0 / q.p)


def kernel_norm_closed_form(q: KernelQuery) -> float:
    """Gamma-function value of the same integral (independent oracle)."""
    a = q.p * q.t
    c = q.p * q.m + q.n
    b = 2 * q.alpha
    radial = math.gamma(c / b) / (b * a ** (c / b))
    return (_sphere_area(q.n) * radial) ** (1.0 / q.p)


def lattice_kernel_norm(q: KernelQuery, cutoff: int | None = None) -> float:
    """Lattice-sum analogue over Z^n (n = 3 only)."""
    if q.n != 3:
        raise ValueError("lattice kernel norm is implemented for n = 3")
    if cutoff is None:
        # e^{-p t R^{2 alpha}} below 1e-40
        cutoff = int(math.ceil((92.0 / (q.p * q.t)) ** (1.0 / (2 * q.alpha)))) + 2
    k = np.arange(-cutoff, cutoff + 1, dtype=float)
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    with np.errstate(divide="ignore"):
        terms = np.exp(-q.p * q.t * k2**q.alpha) * np.where(k2 > 0, k2, 1.0) ** (q.p * q.m / 2)
    if q.m > 0:
        terms[k2 == 0] = 0.0
    return float(np.sum(terms)) ** (1.0 / q.p)


def beta_time_integral(r: float, s: float, t: float) -> float:
    """int_0^t (t - tau)^(-r) tau^(-s) dtau for 0 < r, s < 1.

    Uses tau = t*sigma and algebraic-weight quadrature for the endpoint
    singularities, so the result is t^(1-r-s) * B(1-s, 1-r).
    """
    if not (0 < r < 1) or not (0 < s < 1):
        raise ValueError(f"Beta time integral diverges unless 0 < r, s < 1 (r={r}, s={s})")
    if not t > 0:
        raise ValueError("t must be positive")
    unit, _ = integrate.quad(lambda x: 1.0, 0.0, 1.0, weight="alg", wvar=(-s, -r),
                             epsabs=0.0, epsrel=1e-12)
    return t ** (1.0 - r - s) * unit


def beta_closed_form(r: float, s: float) -> float:
    return float(special.beta(1 - s, 1 - r))
