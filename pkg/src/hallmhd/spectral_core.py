"""Fourier grid on the 3-torus, spectral fields, trajectories and norms.

Fields are stored as the non-redundant half of the Fourier lattice (the
layout of a real-to-complex FFT) with coefficients normalized so that

    f(x) = sum_k a_k exp(i k.x),   ||f||_{L^2}^2 = sum_k |a_k|^2,

i.e. the measure on [0, 2pi)^3 is normalized to unit mass and every
exponential e_k has unit L^2 norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "GridMismatchError",
    "SpectralField",
    "Trajectory",
    "NormSpec",
    "get_grid",
    "transform",
    "inverse_transform",
    "leray_project",
    "sobolev_norm",
    "lp_norm",
    "inner",
    "weighted_spacetime_norm",
    "dealias",
    "curl",
    "divergence",
    "trapezoid_weights",
]

_SPATIAL_AXES = (-3, -2, -1)


class GridMismatchError(ValueError):
    """Raised when fields or trajectories defined on different grids are combined."""


@dataclass(frozen=True)
class Grid:
    """Cubic Fourier grid with ``n`` points (and modes) per direction."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.n!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable integer wavevector components (k1, k2, k3) in half layout."""
        n = self.n
        full = np.fft.fftfreq(n, 1.0 / n)
        half = np.arange(n // 2 + 1, dtype=float)
        return (full[:, None, None], full[None, :, None], half[None, None, :])

    @cached_property
    def k_vector(self) -> np.ndarray:
        k1, k2, k3 = self.wavenumbers
        return np.stack(np.broadcast_arrays(k1, k2, k3)).astype(float)

    @cached_property
    def k2(self) -> np.ndarray:
        k1, k2, k3 = self.wavenumbers
        return k1**2 + k2**2 + k3**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes that carry an unpaired Nyquist index."""
        k1, k2, k3 = self.wavenumbers
        h = -(self.n // 2)
        return (k1 == h) | (k2 == h) | (k3 == self.n // 2)

    @cached_property
    def keep_mask(self) -> np.ndarray:
        return ~self.nyquist_mask

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with every |k_i| <= N/3."""
        k1, k2, k3 = self.wavenumbers
        c = self.n / 3.0
        return (np.abs(k1) <= c) & (np.abs(k2) <= c) & (np.abs(k3) <= c) & self.keep_mask

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """How many lattice points each stored coefficient stands for (0 on Nyquist modes)."""
        k3 = self.wavenumbers[2]
        m = np.where(k3 == 0, 1.0, 2.0) * np.ones(self.spectral_shape)
        m[self.nyquist_mask] = 0.0
        return m

    @cached_property
    def inv_k2(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        return out

    def fractional_symbol(self, alpha: float) -> np.ndarray:
        """Symbol |k|^(2 alpha) of (-Delta)^alpha."""
        return self.k2**alpha

    def sobolev_weight(self, sigma: float) -> np.ndarray:
        return (1.0 + self.k2) ** sigma

    @cached_property
    def negation_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices of -k within the k3 = 0 plane (used for Hermitian checks)."""
        i = (-np.arange(self.n)) % self.n
        return i[:, None], i[None, :]

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = 2.0 * np.pi * np.arange(self.n) / self.n
        return np.meshgrid(x, x, x, indexing="ij")


@lru_cache(maxsize=None)
def get_grid(n: int) -> Grid:
    return Grid(int(n))


def _check_same_grid(*grids: Grid) -> Grid:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(f"grid mismatch: N={first.n} vs N={g.n}")
    return first


def to_physical(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Array-level inverse transform of half-layout coefficients."""
    return sfft.irfftn(coeffs, s=grid.shape, axes=_SPATIAL_AXES, norm="forward")


def to_spectral(values: np.ndarray, grid: Grid) -> np.ndarray:
    out = sfft.rfftn(values, axes=_SPATIAL_AXES, norm="forward")
    out *= grid.keep_mask
    return out


class SpectralField:
    """Truncated Fourier representation of a real field on T^3.

    ``coeffs`` has shape ``(ncomp, N, N, N//2 + 1)``. Nyquist coefficients are
    zeroed on construction. Instances are treated as immutable.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray, *, copy: bool = True):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 3:
            coeffs = coeffs[None]
        if coeffs.shape[1:] != grid.spectral_shape:
            raise GridMismatchError(
                f"coefficient shape {coeffs.shape[1:]} does not match grid N={grid.n}"
            )
        if copy:
            coeffs = coeffs * grid.keep_mask
        coeffs.flags.writeable = False
        self.grid = grid
        self.coeffs = coeffs

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, grid: Grid, ncomp: int = 3) -> "SpectralField":
        return cls(grid, np.zeros((ncomp,) + grid.spectral_shape, complex), copy=False)

    @classmethod
    def from_physical(cls, values: np.ndarray, grid: Grid | None = None) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.ndim == 3:
            values = values[None]
        grid = grid or get_grid(values.shape[-1])
        if values.shape[1:] != grid.shape:
            raise GridMismatchError(f"physical shape {values.shape[1:]} vs grid N={grid.n}")
        return cls(grid, to_spectral(values, grid), copy=False)

    @classmethod
    def from_modes(cls, grid: Grid, modes: dict, ncomp: int = 3) -> "SpectralField":
        """Build a field from ``{(k1, k2, k3): vector}``; conjugate partners are filled in."""
        c = np.zeros((ncomp,) + grid.spectral_shape, complex)
        n = grid.n
        for k, vec in modes.items():
            vec = np.broadcast_to(np.asarray(vec, complex), (ncomp,))
            k = tuple(int(x) for x in k)
            if any(abs(x) >= n // 2 for x in k):
                raise ValueError(f"mode {k} outside the resolved lattice for N={n}")
            neg = tuple(-x for x in k)
            if k[2] >= 0:
                c[:, k[0] % n, k[1] % n, k[2]] = vec
            if neg[2] >= 0:
                c[:, neg[0] % n, neg[1] % n, neg[2]] = np.conj(vec)
        return cls(grid, c)

    # basic protocol ---------------------------------------------------
    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def __repr__(self) -> str:
        return f"SpectralField(N={self.grid.n}, ncomp={self.ncomp})"

    def _wrap(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs, copy=False)

    def _other(self, other: "SpectralField") -> np.ndarray:
        _check_same_grid(self.grid, other.grid)
        return other.coeffs

    def __add__(self, other):
        return self._wrap(self.coeffs + self._other(other))

    def __sub__(self, other):
        return self._wrap(self.coeffs - self._other(other))

    def __neg__(self):
        return self._wrap(-self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar) or np.iscomplexobj(scalar):
            return NotImplemented
        return self._wrap(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def multiply(self, symbol: np.ndarray) -> "SpectralField":
        """Apply a real Fourier multiplier (broadcast over components)."""
        return self._wrap(self.coeffs * symbol)

    # physical space ---------------------------------------------------
    def to_physical(self) -> np.ndarray:
        return to_physical(self.coeffs, self.grid)

    # flags --------------------------------------------------------------
    @property
    def is_zero_mean(self) -> bool:
        return bool(np.all(self.coeffs[:, 0, 0, 0] == 0))

    def is_div_free(self, rtol: float = 1e-12) -> bool:
        if self.ncomp != 3:
            return False
        k = self.grid.k_vector
        kdota = np.abs(np.einsum("i...,i...->...", k, self.coeffs))
        bound = rtol * np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0)) * self.grid.kmag
        return bool(np.all(kdota <= bound + 1e-300))

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        plane = self.coeffs[..., 0]
        i, j = self.grid.negation_index
        partner = np.conj(plane[:, i, j])
        scale = max(np.max(np.abs(plane), initial=0.0), 1e-300)
        return bool(np.max(np.abs(plane - partner), initial=0.0) <= rtol * scale)

    def is_dealiased(self) -> bool:
        return bool(np.all(self.coeffs[:, ~self.grid.dealias_mask] == 0))


def transform(field: SpectralField) -> np.ndarray:
    """Physical-space values of ``field`` on the uniform grid, shape (ncomp, N, N, N)."""
    return field.to_physical()


def inverse_transform(values: np.ndarray, grid: Grid | None = None) -> SpectralField:
    """Fourier coefficients of real grid values."""
    return SpectralField.from_physical(values, grid)


def leray_project(field: SpectralField) -> SpectralField:
    """a_k -> a_k - k (k.a_k)/|k|^2 for k != 0; identity on the mean."""
    return field._wrap(leray_coeffs(field.coeffs, field.grid))


def leray_coeffs(a: np.ndarray, grid: Grid) -> np.ndarray:
    """Leray projection of coefficient blocks shaped (..., 3, N, N, N//2+1)."""
    k = grid.k_vector
    kdota = np.sum(k * a, axis=-4, keepdims=True)
    return a - k * (kdota * grid.inv_k2)


def dealias(field: SpectralField) -> SpectralField:
    return field._wrap(field.coeffs * field.grid.dealias_mask)


def curl_coeffs(a: np.ndarray, grid: Grid) -> np.ndarray:
    k1, k2, k3 = grid.wavenumbers
    out = np.empty_like(a)
    out[0] = 1j * (k2 * a[2] - k3 * a[1])
    out[1] = 1j * (k3 * a[0] - k1 * a[2])
    out[2] = 1j * (k1 * a[1] - k2 * a[0])
    return out


def curl(field: SpectralField) -> SpectralField:
    return field._wrap(curl_coeffs(field.coeffs, field.grid))


def divergence(field: SpectralField) -> SpectralField:
    k1, k2, k3 = field.grid.wavenumbers
    a = field.coeffs
    return field._wrap((1j * (k1 * a[0] + k2 * a[1] + k3 * a[2]))[None])


def gradient(field: SpectralField) -> SpectralField:
    """Gradient of a scalar field."""
    if field.ncomp != 1:
        raise ValueError("gradient expects a scalar field")
    return field._wrap(1j * field.grid.k_vector * field.coeffs[0])


def sobolev_norm(field: SpectralField, sigma: float) -> float:
    """Inhomogeneous H^sigma norm: sqrt(sum_k (1+|k|^2)^sigma |a_k|^2)."""
    g = field.grid
    w = g.multiplicity * g.sobolev_weight(sigma)
    return math.sqrt(float(np.sum(w * np.sum(np.abs(field.coeffs) ** 2, axis=0))))


def inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 pairing <f, g> with the normalized measure."""
    _check_same_grid(f.grid, g.grid)
    prod = np.sum(f.coeffs * np.conj(g.coeffs), axis=0)
    return float(np.sum(f.grid.multiplicity * prod.real))


def _lp_from_values(values: np.ndarray, p: float) -> np.ndarray:
    """L^p norm over the last three axes of the pointwise Euclidean magnitude."""
    mag2 = np.sum(values**2, axis=-4)
    if math.isinf(p):
        return np.sqrt(np.max(mag2, axis=_SPATIAL_AXES))
    if p == 2:
        return np.sqrt(np.mean(mag2, axis=_SPATIAL_AXES))
    return np.mean(mag2 ** (p / 2.0), axis=_SPATIAL_AXES) ** (1.0 / p)


def lp_norm(field: SpectralField, p: float) -> float:
    """Grid quadrature of (avg |f|^p)^(1/p); p = inf gives the grid maximum."""
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    return float(_lp_from_values(field.to_physical(), p))


@dataclass(frozen=True)
class NormSpec:
    """Descriptor of a spatial or weighted space-time norm.

    kind ``"sobolev"`` uses ``sigma``; ``"lebesgue"`` uses ``p``;
    ``"spacetime"`` is (int_0^T ||t^weight f(t)||_X^time_exp dt)^(1/time_exp)
    where X is L^p (``p`` set) or H^sigma (``sigma`` set).
    """

    kind: str
    sigma: float | None = None
    p: float | None = None
    weight: float = 0.0
    time_exp: float | None = None

    def __post_init__(self):
        if self.kind not in ("sobolev", "lebesgue", "spacetime"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.p is not None and not self.p >= 1:
            raise ValueError("Lebesgue exponent must be >= 1")
        if self.kind == "sobolev" and self.sigma is None:
            raise ValueError("Sobolev norm needs sigma")
        if self.kind == "lebesgue" and self.p is None:
            raise ValueError("Lebesgue norm needs p")
        if self.kind == "spacetime":
            if (self.p is None) == (self.sigma is None):
                raise ValueError("space-time norm needs exactly one of p or sigma")
            if self.time_exp is None or not self.time_exp > 0:
                raise ValueError("time exponent must be in (0, inf]")
            if self.weight < 0:
                raise ValueError("time weight exponent must be >= 0")

    @classmethod
    def sobolev(cls, sigma: float) -> "NormSpec":
        return cls("sobolev", sigma=float(sigma))

    @classmethod
    def lebesgue(cls, p: float) -> "NormSpec":
        return cls("lebesgue", p=float(p))

    @classmethod
    def spacetime(cls, weight: float, time_exp: float, p: float | None = None,
                  sigma: float | None = None) -> "NormSpec":
        return cls("spacetime", sigma=None if sigma is None else float(sigma),
                   p=None if p is None else float(p), weight=float(weight),
                   time_exp=float(time_exp))

    @property
    def spatial(self) -> "NormSpec":
        if self.kind != "spacetime":
            return self
        if self.p is not None:
            return NormSpec.lebesgue(self.p)
        return NormSpec.sobolev(self.sigma)

    def __call__(self, obj):
        if self.kind == "spacetime":
            return weighted_spacetime_norm(obj, self)
        if self.kind == "sobolev":
            return sobolev_norm(obj, self.sigma)
        return lp_norm(obj, self.p)


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights on the nodes, with [0, t_0] lumped onto t_0.

    The weights sum to the final time.
    """
    t = np.asarray(times, float)
    w = np.zeros_like(t)
    if t.size == 1:
        w[0] = t[0]
        return w
    h = np.diff(t)
    w[:-1] += h / 2
    w[1:] += h / 2
    w[0] += t[0]
    return w


class Trajectory:
    """Time samples of spectral fields on a common grid.

    Coefficients are stacked in an array of shape ``(M, ncomp, N, N, N//2+1)``.
    """

    __slots__ = ("grid", "times", "coeffs", "_weights")

    def __init__(self, grid: Grid, times, coeffs: np.ndarray, weights=None):
        times = np.asarray(times, dtype=float)
        coeffs = np.asarray(coeffs)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("trajectory needs at least one sample")
        if times[0] < 0 or np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be nonnegative and strictly increasing")
        if coeffs.ndim != 5 or coeffs.shape[0] != times.size or coeffs.shape[2:] != grid.spectral_shape:
            raise GridMismatchError(f"coefficient block {coeffs.shape} inconsistent with "
                                    f"{times.size} samples on N={grid.n}")
        coeffs.flags.writeable = False
        self.grid = grid
        self.times = times
        self.coeffs = coeffs
        if weights is None:
            weights = trapezoid_weights(times)
        self._weights = np.asarray(weights, float)

    @classmethod
    def from_fields(cls, times, fields: Sequence[SpectralField]) -> "Trajectory":
        fields = list(fields)
        if not fields:
            raise ValueError("trajectory needs at least one sample")
        grid = _check_same_grid(*(f.grid for f in fields))
        return cls(grid, times, np.stack([f.coeffs for f in fields]))

    @classmethod
    def zeros(cls, grid: Grid, times, ncomp: int = 3) -> "Trajectory":
        times = np.asarray(times, float)
        return cls(grid, times, np.zeros((times.size, ncomp) + grid.spectral_shape, complex))

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[1]

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, j: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[j], copy=False)

    def __iter__(self) -> Iterator[tuple[float, SpectralField]]:
        for j in range(len(self)):
            yield float(self.times[j]), self[j]

    def __repr__(self) -> str:
        return f"Trajectory(N={self.grid.n}, samples={len(self)}, T={self.T:g})"

    def _check(self, other: "Trajectory") -> None:
        _check_same_grid(self.grid, other.grid)
        if self.times.shape != other.times.shape or not np.array_equal(self.times, other.times):
            raise ValueError("trajectories are sampled at different times")

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self._check(other)
        return Trajectory(self.grid, self.times, self.coeffs + other.coeffs, self._weights)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check(other)
        return Trajectory(self.grid, self.times, self.coeffs - other.coeffs, self._weights)

    def __mul__(self, scalar) -> "Trajectory":
        return Trajectory(self.grid, self.times, self.coeffs * float(scalar), self._weights)

    __rmul__ = __mul__

    def spatial_norms(self, spec: NormSpec, chunk: int = 16) -> np.ndarray:
        """Spatial norm of each sample."""
        spec = spec.spatial
        if spec.kind == "sobolev":
            w = self.grid.multiplicity * self.grid.sobolev_weight(spec.sigma)
            e = np.sum(np.abs(self.coeffs) ** 2, axis=1)
            return np.sqrt(np.sum(w * e, axis=(1, 2, 3)))
        out = np.empty(len(self))
        for start in range(0, len(self), chunk):
            block = to_physical(self.coeffs[start:start + chunk], self.grid)
            out[start:start + chunk] = _lp_from_values(block, spec.p)
        return out


def spacetime_from_values(times, weights, values, spec: NormSpec) -> float:
    """Weighted space-time norm from per-sample spatial norms."""
    t = np.asarray(times, float)
    tw = np.where(t > 0, t, 0.0) ** spec.weight if spec.weight else np.ones_like(t)
    g = tw * np.asarray(values, float)
    if math.isinf(spec.time_exp):
        return float(np.max(g))
    s = spec.time_exp
    return float(np.sum(np.asarray(weights) * g**s) ** (1.0 / s))


def weighted_spacetime_norm(traj: Trajectory, spec: NormSpec) -> float:
    """(int_0^T ||t^r f(t)||^s dt)^(1/s) by trapezoid quadrature on the samples.

    ``time_exp = inf`` gives the maximum over samples, a lower bound on the
    continuum supremum.
    """
    if spec.kind != "spacetime":
        raise ValueError("weighted_spacetime_norm needs a space-time NormSpec")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return spacetime_from_values(traj.times, traj.weights, traj.spatial_norms(spec), spec)
