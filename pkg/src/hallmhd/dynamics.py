"""Pseudo-spectral nonlinear terms, energy diagnostics and scaling residuals.

Products are formed on the physical grid and truncated with the two-thirds
rule.  Internally the nonlinearities are evaluated in rotational form:

    -(u.grad)u + (B.grad)B = u x curl u + (curl B) x B + gradient,
    -(u.grad)B + (B.grad)u - curl((curl B) x B) = curl((u - curl B) x B),

which is algebraically identical to the tensor-divergence forms for
divergence-free fields and needs fewer transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral_core import (
    Grid,
    SpectralField,
    Trajectory,
    _check_same_grid,
    get_grid,
    leray_coeffs,
    to_physical,
    to_spectral,
)

__all__ = [
    "NSE",
    "ELECTRON_MHD",
    "HALL_MHD",
    "HEAT",
    "SystemKind",
    "PreconditionError",
    "advection",
    "hall_term",
    "hall_term_divergence_form",
    "hall_form_discrepancy",
    "rhs",
    "energy_balance",
    "EnergyBalance",
    "cross_pairing",
    "scaling_residual",
    "rescale_field",
]

NSE = "nse"
ELECTRON_MHD = "emhd"
HALL_MHD = "hall_mhd"
HEAT = "heat"
_TAGS = (NSE, ELECTRON_MHD, HALL_MHD, HEAT)
_ALIASES = {"navier_stokes": NSE, "electron_mhd": ELECTRON_MHD, "hallmhd": HALL_MHD,
            "hall": HALL_MHD, "electronmhd": ELECTRON_MHD}


class PreconditionError(ValueError):
    """Input field violates a structural precondition (divergence, dealiasing)."""


@dataclass(frozen=True)
class SystemKind:
    """Which system is being solved and its dissipation order.

    ``heat`` is the linear flow with no nonlinearity; it is used for
    diagnostics only and accepts any positive order.
    """

    tag: str
    alpha: float

    def __post_init__(self):
        tag = _ALIASES.get(str(self.tag).lower(), str(self.tag).lower())
        if tag not in _TAGS:
            raise ValueError(f"unknown system {self.tag!r}; expected one of {_TAGS}")
        object.__setattr__(self, "tag", tag)
        if tag == HEAT:
            if not self.alpha > 0:
                raise ValueError("dissipation order must be positive")
        elif not (1.0 <= self.alpha < 1.75):
            raise ValueError(f"dissipation order must lie in [1, 7/4), got {self.alpha}")

    @property
    def has_velocity(self) -> bool:
        return self.tag in (NSE, HALL_MHD)

    @property
    def has_magnetic(self) -> bool:
        return self.tag in (ELECTRON_MHD, HALL_MHD)


# ---------------------------------------------------------------------------
# array-level kernels on coefficient blocks shaped (..., 3, N, N, N//2+1)
# ---------------------------------------------------------------------------

def _curl(a: np.ndarray, grid: Grid) -> np.ndarray:
    k1, k2, k3 = grid.wavenumbers
    a1, a2, a3 = a[..., 0, :, :, :], a[..., 1, :, :, :], a[..., 2, :, :, :]
    return 1j * np.stack([k2 * a3 - k3 * a2, k3 * a1 - k1 * a3, k1 * a2 - k2 * a1], axis=-4)


def _truncated(values: np.ndarray, grid: Grid) -> np.ndarray:
    out = to_spectral(values, grid)
    out *= grid.dealias_mask
    return out


def _cross(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.cross(x, y, axisa=-4, axisb=-4, axisc=-4)


def magnetic_nonlinearity(B: np.ndarray, grid: Grid, u: np.ndarray | None = None) -> np.ndarray:
    """curl((u - curl B) x B); the electron-MHD case is u = None."""
    J = _curl(B, grid)
    drift = to_physical(-J if u is None else u - J, grid)
    return _curl(_truncated(_cross(drift, to_physical(B, grid)), grid), grid)


def velocity_nonlinearity(u: np.ndarray, grid: Grid, B: np.ndarray | None = None) -> np.ndarray:
    """P[u x curl u + (curl B) x B], i.e. -P[(u.grad)u - (B.grad)B]."""
    up = to_physical(u, grid)
    prod = _cross(up, to_physical(_curl(u, grid), grid))
    if B is not None:
        prod = prod + _cross(to_physical(_curl(B, grid), grid), to_physical(B, grid))
    return leray_coeffs(_truncated(prod, grid), grid)


def nonlinear_coeffs(kind: SystemKind, u: np.ndarray | None, B: np.ndarray | None,
                     grid: Grid) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Nonlinear parts of the velocity and magnetic tendencies (no dissipation)."""
    if kind.tag == HEAT:
        return (None if u is None else np.zeros_like(u), None if B is None else np.zeros_like(B))
    if kind.tag == NSE:
        return velocity_nonlinearity(u, grid), None
    if kind.tag == ELECTRON_MHD:
        return None, magnetic_nonlinearity(B, grid)
    return velocity_nonlinearity(u, grid, B), magnetic_nonlinearity(B, grid, u)


# ---------------------------------------------------------------------------
# field-level operations
# ---------------------------------------------------------------------------

def _require(field: SpectralField, name: str, rtol: float = 1e-10) -> None:
    if field.ncomp != 3:
        raise PreconditionError(f"{name} must be a 3-vector field")
    if not field.is_div_free(rtol):
        raise PreconditionError(f"{name} is not divergence-free")
    if not field.is_dealiased():
        raise PreconditionError(f"{name} has modes beyond the two-thirds cutoff")


def advection(u: SpectralField, v: SpectralField) -> SpectralField:
    """(u.grad)v, computed on the grid and truncated."""
    grid = _check_same_grid(u.grid, v.grid)
    _require(u, "u")
    _require(v, "v")
    k = grid.k_vector
    up = to_physical(u.coeffs, grid)
    # grad v: (3 derivative directions, 3 components)
    dv = to_physical(1j * k[:, None] * v.coeffs[None], grid)
    prod = np.einsum("j...,ji...->i...", up, dv)
    return SpectralField(grid, _truncated(prod, grid), copy=False)


def hall_term(B: SpectralField) -> SpectralField:
    """curl((curl B) x B)."""
    _require(B, "B")
    J = _curl(B.coeffs, B.grid)
    prod = _cross(to_physical(J, B.grid), to_physical(B.coeffs, B.grid))
    return SpectralField(B.grid, _curl(_truncated(prod, B.grid), B.grid), copy=False)


def hall_term_divergence_form(B: SpectralField) -> SpectralField:
    """curl div(B (x) B) with (div(a (x) b))_i = d_j(a_j b_i)."""
    _require(B, "B")
    grid = B.grid
    Bp = to_physical(B.coeffs, grid)
    k = grid.k_vector
    div = np.zeros_like(B.coeffs)
    for i in range(3):
        for j in range(3):
            div[i] += 1j * k[j] * _truncated(Bp[j] * Bp[i], grid)
    return SpectralField(grid, _curl(div, grid), copy=False)


def hall_form_discrepancy(B: SpectralField) -> float:
    """Relative L^2 difference between the two Hall-term evaluations."""
    a = hall_term(B)
    b = hall_term_divergence_form(B)
    scale = max(_l2(a.coeffs, B.grid), _l2(b.coeffs, B.grid))
    return 0.0 if scale == 0 else _l2(a.coeffs - b.coeffs, B.grid) / scale


def rhs(kind: SystemKind, u: SpectralField | None, B: SpectralField | None):
    """Full tendencies (du/dt, dB/dt) including the fractional dissipation.

    NSE ignores B and electron MHD ignores u; the ignored slot of the result
    is a zero field.
    """
    fields = [f for f in (u, B) if f is not None]
    if not fields:
        raise ValueError("rhs needs at least one field")
    grid = _check_same_grid(*(f.grid for f in fields))
    uc = None
    Bc = None
    if kind.has_velocity or kind.tag == HEAT:
        if u is None:
            raise ValueError(f"{kind.tag} needs a velocity field")
        _require(u, "u")
        uc = u.coeffs
    if kind.has_magnetic:
        if B is None:
            raise ValueError(f"{kind.tag} needs a magnetic field")
        _require(B, "B")
        Bc = B.coeffs
    sym = grid.fractional_symbol(kind.alpha)
    nu, nB = nonlinear_coeffs(kind, uc, Bc, grid)
    zero = np.zeros((3,) + grid.spectral_shape, complex)
    du = zero if uc is None else nu - sym * uc
    dB = zero if Bc is None else nB - sym * Bc
    return SpectralField(grid, du, copy=False), SpectralField(grid, dB, copy=False)


def _l2(coeffs: np.ndarray, grid: Grid) -> float:
    return math.sqrt(float(np.sum(grid.multiplicity * np.sum(np.abs(coeffs) ** 2, axis=-4))))


def _pair(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(np.sum(grid.multiplicity * np.sum(a * np.conj(b), axis=-4).real))


def cross_pairing(u: SpectralField, B: SpectralField) -> float:
    """Relative size of <(B.grad)u, B> + <(B.grad)B, u>.

    Normalized by |<(B.grad)u, B>| + |<(B.grad)B, u>|; 0 when both vanish.
    """
    grid = _check_same_grid(u.grid, B.grid)
    a = _pair(advection(B, u).coeffs, B.coeffs, grid)
    b = _pair(advection(B, B).coeffs, u.coeffs, grid)
    scale = abs(a) + abs(b)
    return 0.0 if scale == 0 else abs(a + b) / scale


# ---------------------------------------------------------------------------
# energy law
# ---------------------------------------------------------------------------

@dataclass
class EnergyBalance:
    """Per-interval residual of d/dt E + D = 0 (midpoint in time)."""

    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    @property
    def relative_residual(self) -> float:
        """max |residual| over the mean dissipation rate."""
        scale = float(np.mean(self.dissipation))
        return 0.0 if scale == 0 else self.max_residual / scale


def _traj_energy(traj: Trajectory, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    g = traj.grid
    e = np.sum(np.abs(traj.coeffs) ** 2, axis=1)
    w = g.multiplicity
    energy = 0.5 * np.sum(w * e, axis=(1, 2, 3))
    diss = np.sum(w * g.fractional_symbol(alpha) * e, axis=(1, 2, 3))
    return energy, diss


def energy_balance(traj_u: Trajectory | None, traj_B: Trajectory | None, alpha: float) -> EnergyBalance:
    """Difference quotient of E = (|u|^2 + |B|^2)/2 plus trapezoid-averaged dissipation."""
    trajs = [t for t in (traj_u, traj_B) if t is not None]
    if not trajs:
        raise ValueError("energy_balance needs at least one trajectory")
    times = trajs[0].times
    for t in trajs[1:]:
        if not np.array_equal(t.times, times):
            raise ValueError("trajectories are sampled at different times")
    energy = np.zeros(times.size)
    diss = np.zeros(times.size)
    for t in trajs:
        e, d = _traj_energy(t, alpha)
        energy += e
        diss += d
    dt = np.diff(times)
    residual = np.diff(energy) / dt + 0.5 * (diss[1:] + diss[:-1])
    return EnergyBalance(times, energy, diss, residual)


# ---------------------------------------------------------------------------
# scaling symmetry
# ---------------------------------------------------------------------------

def _amplitude_exponent(kind: SystemKind) -> float:
    if kind.tag == ELECTRON_MHD:
        return 2 * kind.alpha - 2
    if kind.tag in (NSE, HEAT):
        return 2 * kind.alpha - 1
    raise ValueError("the coupled system has no scaling symmetry (the Hall term breaks it)")


def rescale_field(field: SpectralField, lam: int, out_grid: Grid | None = None,
                  amplitude: float = 1.0) -> SpectralField:
    """Coefficients of amplitude * f(lam x): the mode k moves to lam k."""
    if out_grid is None:
        out_grid = get_grid(lam * field.grid.n)
    m = out_grid.n
    k1, k2, k3 = (np.broadcast_to(w, field.grid.spectral_shape).astype(np.int64)
                  for w in field.grid.wavenumbers)
    live = field.grid.keep_mask & np.any(field.coeffs != 0, axis=0)
    if np.any(live & ((np.abs(lam * k1) >= m // 2) | (np.abs(lam * k2) >= m // 2) | (lam * k3 >= m // 2))):
        raise ValueError(f"rescaled modes do not fit on N={m}")
    out = np.zeros((field.ncomp,) + out_grid.spectral_shape, complex)
    idx = np.nonzero(live)
    out[(slice(None), (lam * k1[idx]) % m, (lam * k2[idx]) % m, lam * k3[idx])] = \
        amplitude * field.coeffs[(slice(None),) + idx]
    return SpectralField(out_grid, out, copy=False)


_FD8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _time_derivative(solution: Callable, t: float, h: float) -> tuple[SpectralField, np.ndarray]:
    samples = [solution(t + j * h) for j in range(-4, 5)]
    return samples[4], sum(c * s.coeffs for c, s in zip(_FD8, samples) if c) / h


def scaling_residual(kind: SystemKind, solution: Callable, lam: int, t: float,
                     h: float | None = None) -> float:
    """Relative PDE residual of the rescaled solution at time t.

    ``solution(tau)`` returns the SpectralField at time tau.  The rescaled field is
    lam^a f(lam x, lam^(2 alpha) t) with a = 2 alpha - 1 (NSE, heat) or
    2 alpha - 2 (electron MHD).  Its time derivative comes from an
    eighth-order central difference of ``solution`` around lam^(2 alpha) t.
    The residual is measured in L^2 and divided by the L^2 norm of the
    dissipative term of the rescaled field.
    """
    if isinstance(lam, bool) or not isinstance(lam, (int, np.integer)) or lam < 1:
        raise ValueError(f"scaling factor must be a positive integer, got {lam!r}")
    a = _amplitude_exponent(kind)
    alpha = kind.alpha
    tau = lam ** (2 * alpha) * t
    f0 = solution(tau)
    if not np.any(f0.coeffs):
        return 0.0
    if h is None:
        live = np.any(f0.coeffs != 0, axis=0)
        top = float(np.max(f0.grid.fractional_symbol(alpha)[live]))
        h = 0.02 / max(top, 1e-300)
        if tau > 0:
            h = min(h, tau / 8)
    value, deriv = _time_derivative(solution, tau, h)
    scaled = rescale_field(value, lam, amplitude=float(lam) ** a)
    dscaled = rescale_field(SpectralField(value.grid, deriv, copy=False), lam,
                            amplitude=float(lam) ** (a + 2 * alpha))
    grid = scaled.grid
    sym = grid.fractional_symbol(alpha)
    c = scaled.coeffs
    if kind.tag == NSE:
        nl = velocity_nonlinearity(c, grid)
    elif kind.tag == ELECTRON_MHD:
        nl = magnetic_nonlinearity(c, grid)
    else:
        nl = np.zeros_like(c)
    res = dscaled.coeffs + sym * c - nl
    scale = _l2(sym * c, grid)
    return _l2(res, grid) / scale if scale else 0.0
