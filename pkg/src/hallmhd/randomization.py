"""Diagonal randomization of Fourier data and sub-Gaussian moment checks.

Random variables are produced by a counter-based hash keyed by
(seed, stream, lattice point k).  The value attached to a wavevector does not
depend on the grid size, so the same draw seen at N = 32 and N = 64 agrees on
every mode both grids resolve.  Realness is kept by the symmetrization
l_{-k} = l_k.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .spectral_core import Grid, GridMismatchError, SpectralField, get_grid

__all__ = [
    "RADEMACHER",
    "GAUSSIAN",
    "RandomDraw",
    "draw",
    "randomize",
    "derive_seed",
    "moment_check",
    "MomentReport",
    "power_law_field",
    "lattice_uniforms",
]

RADEMACHER = "rademacher"
GAUSSIAN = "gaussian"
_DISTRIBUTIONS = (RADEMACHER, GAUSSIAN)

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_OFFSET = 1 << 20  # |k_i| < 2^20


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _lattice_counter(k1, k2, k3) -> np.ndarray:
    c = (np.asarray(k1, np.int64) + _OFFSET).astype(np.uint64)
    c = (c << np.uint64(21)) | (np.asarray(k2, np.int64) + _OFFSET).astype(np.uint64)
    c = (c << np.uint64(21)) | (np.asarray(k3, np.int64) + _OFFSET).astype(np.uint64)
    return c


def _hash_bits(seed: int, stream: int, counter: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        key = _mix(np.array([(int(seed) & _MASK64)], np.uint64) + _GOLDEN)
        key = _mix(key ^ np.uint64((stream * 0x632BE59BD9B4E019) & _MASK64))
        return _mix(key ^ (counter * _GOLDEN))


def lattice_uniforms(seed: int, stream: int, k1, k2, k3) -> np.ndarray:
    """Uniform(0, 1) variates keyed by (seed, stream, k); open interval."""
    bits = _hash_bits(seed, stream, _lattice_counter(k1, k2, k3))
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)


def _canonical(grid: Grid):
    """Representative of {k, -k} for every stored coefficient, and whether k was flipped."""
    k1, k2, k3 = (np.broadcast_to(w, grid.spectral_shape) for w in grid.wavenumbers)
    flip = (k3 == 0) & ((k1 < 0) | ((k1 == 0) & (k2 < 0)))
    sign = np.where(flip, -1, 1)
    return (sign * k1).astype(np.int64), (sign * k2).astype(np.int64), (sign * k3).astype(np.int64), flip


def derive_seed(base_seed: int, index: int) -> int:
    """Seed of ensemble member ``index``; depends only on (base_seed, index)."""
    ss = np.random.SeedSequence(int(base_seed) & _MASK64, spawn_key=(int(index),))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class RandomDraw:
    """One realization (l_k) of the randomizing variables on a grid.

    ``values`` has the half-lattice layout of the grid, shape (N, N, N//2+1),
    or (3, N, N, N//2+1) when each component gets its own variables.
    """

    seed: int
    distribution: str
    grid: Grid
    per_component: bool = False
    values: np.ndarray = field(repr=False, compare=False, default=None)

    def full_lattice(self) -> np.ndarray:
        """Values on the whole lattice (N, N, N) indexed like numpy's fftn output."""
        n = self.grid.n
        k = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
        K1, K2, K3 = np.meshgrid(k, k, k, indexing="ij")
        return _draw_values(self.seed, self.distribution, K1, K2, K3, self.per_component)


def _draw_values(seed, distribution, k1, k2, k3, per_component):
    flip = (k3 < 0) | ((k3 == 0) & ((k1 < 0) | ((k1 == 0) & (k2 < 0))))
    sign = np.where(flip, -1, 1)
    c1, c2, c3 = sign * k1, sign * k2, sign * k3
    streams = (1, 2, 3) if per_component else (0,)
    out = []
    for st in streams:
        u = lattice_uniforms(seed, st, c1, c2, c3)
        if distribution == RADEMACHER:
            out.append(np.where(u < 0.5, -1.0, 1.0))
        else:
            out.append(special.ndtri(u))
    return np.stack(out) if per_component else out[0]


def draw(seed: int, distribution: str, grid: Grid, per_component: bool = False) -> RandomDraw:
    """Independent zero-mean unit-variance variables, one per pair {k, -k}."""
    if distribution not in _DISTRIBUTIONS:
        raise ValueError(f"distribution must be one of {_DISTRIBUTIONS}, got {distribution!r}")
    k1, k2, k3, _ = _canonical(grid)
    values = _draw_values(int(seed), distribution, k1, k2, k3, per_component)
    values.flags.writeable = False
    return RandomDraw(int(seed), distribution, grid, per_component, values)


def randomize(f: SpectralField, d: RandomDraw) -> SpectralField:
    """f^omega: multiply every Fourier coefficient a_k by l_k (shared across components)."""
    if f.grid != d.grid:
        raise GridMismatchError(f"field on N={f.grid.n} but draw on N={d.grid.n}")
    return f.multiply(d.values)


@dataclass
class MomentReport:
    q: np.ndarray
    moment: np.ndarray
    ratio: np.ndarray
    norm_c: float

    @property
    def spread(self) -> float:
        """max/min of the bound ratio over q."""
        return float(np.max(self.ratio) / np.min(self.ratio))


def moment_check(c: Sequence[float], q, n_samples: int = 100_000, seed: int = 0,
                 distribution: str = RADEMACHER, chunk: int = 10_000) -> MomentReport:
    """Monte Carlo (E|sum_i c_i l_i|^q)^(1/q) and its ratio to sqrt(q) ||c||_2."""
    c = np.asarray(c, float).ravel()
    if c.size == 0:
        raise ValueError("coefficient sequence is empty")
    qs = np.atleast_1d(np.asarray(q, float))
    if np.any(qs < 2):
        raise ValueError("moment order must be >= 2")
    if distribution not in _DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
    norm_c = float(np.linalg.norm(c))
    # accumulate E|S|^q / norm^q in a scaled form to avoid overflow at large q
    sums = np.zeros(qs.size)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        if distribution == RADEMACHER:
            l = rng.integers(0, 2, size=(m, c.size), dtype=np.int8) * 2.0 - 1.0
        else:
            l = rng.standard_normal((m, c.size))
        S = np.abs(l @ c) / norm_c if norm_c > 0 else np.zeros(m)
        sums += np.sum(S[None, :] ** qs[:, None], axis=1)
        done += m
    moment = (sums / n_samples) ** (1.0 / qs) * norm_c
    ratio = moment / (np.sqrt(qs) * norm_c) if norm_c > 0 else np.zeros_like(qs)
    return MomentReport(qs, moment, ratio, norm_c)


def power_law_field(grid: Grid, s: float, amplitude: float = 1.0, *, kmax: float | None = None,
                    shape_seed: int = 0, cutoff: str = "dealias") -> SpectralField:
    """Divergence-free zero-mean field with |a_k| = amplitude * (1+|k|^2)^(-(s+3/2)/2).

    Directions (transverse to k) and phases come from the lattice hash keyed by
    ``shape_seed``, so the field at a larger N extends the one at a smaller N.
    ``cutoff='dealias'`` keeps only modes retained by the two-thirds rule;
    ``kmax`` further restricts to |k| <= kmax.
    """
    k1, k2, k3, flip = _canonical(grid)
    z = []
    for st in range(6):
        u = lattice_uniforms(shape_seed, 100 + st, k1, k2, k3)
        z.append(special.ndtri(u))
    vec = np.stack([z[0] + 1j * z[1], z[2] + 1j * z[3], z[4] + 1j * z[5]])
    kc = np.stack([k1, k2, k3]).astype(float)
    k2n = np.sum(kc**2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        vec = vec - kc * (np.sum(kc * vec, axis=0) / np.where(k2n > 0, k2n, 1.0))
        vec = vec / np.sqrt(np.sum(np.abs(vec) ** 2, axis=0))
    vec = np.where(flip, np.conj(vec), vec)
    amp = amplitude * (1.0 + grid.k2) ** (-(s + 1.5) / 2.0)
    mask = grid.dealias_mask.copy() if cutoff == "dealias" else grid.keep_mask.copy()
    if kmax is not None:
        mask &= grid.kmag <= kmax
    mask &= grid.k2 > 0
    coeffs = np.where(mask, amp * vec, 0.0)
    coeffs = _hermitian_plane_fix(coeffs, grid)
    return SpectralField(grid, coeffs)


def _hermitian_plane_fix(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Enforce a_{-k} = conj(a_k) exactly on the k3 = 0 plane."""
    i, j = grid.negation_index
    plane = coeffs[..., 0]
    k1, k2, _ = grid.wavenumbers
    flip = ((k1 < 0) | ((k1 == 0) & (k2 < 0)))[..., 0]
    fixed = np.where(flip, np.conj(plane[:, i, j]), plane)
    coeffs = coeffs.copy()
    coeffs[..., 0] = fixed
    return coeffs


_DIST_TAG = {RADEMACHER: 0, GAUSSIAN: 1}
_TAG_DIST = {v: k for k, v in _DIST_TAG.items()}
_PER_COMPONENT_BIT = 0x100


def draw_to_bytes(d: RandomDraw) -> bytes:
    """'SRND' block: magic, version, seed (u64), distribution tag (u32), N (u32)."""
    tag = _DIST_TAG[d.distribution] | (_PER_COMPONENT_BIT if d.per_component else 0)
    return b"SRND" + struct.pack("<IQII", 1, d.seed & _MASK64, tag, d.grid.n)


def draw_from_bytes(buf: bytes) -> RandomDraw:
    if buf[:4] != b"SRND":
        raise ValueError("not an SRND block")
    version, seed, tag, n = struct.unpack_from("<IQII", buf, 4)
    if version != 1:
        raise ValueError(f"unsupported SRND version {version}")
    return draw(seed, _TAG_DIST[tag & 0xFF], get_grid(n), bool(tag & _PER_COMPONENT_BIT))
