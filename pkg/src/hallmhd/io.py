"""Binary field and trajectory dumps.

SFLD block (little-endian):
    b"SFLD", version u32, N u32, ncomp u32,
    then for every k in lexicographic order (k1, k2, k3 each ascending over
    -N/2 .. N/2-1) and every component: real f64, imag f64.
STRJ block:
    b"STRJ", version u32, sample count u32, then per sample: time f64 and an
    embedded SFLD block.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral_core import SpectralField, Trajectory, get_grid

__all__ = ["field_to_bytes", "field_from_bytes", "trajectory_to_bytes", "trajectory_from_bytes",
           "write_field", "read_field", "write_trajectory", "read_trajectory"]

VERSION = 1
_HEAD = struct.Struct("<4sIII")
_TRJ = struct.Struct("<4sII")
_TIME = struct.Struct("<d")


def _full_lattice(field: SpectralField) -> np.ndarray:
    """Coefficients on the whole lattice (ncomp, N, N, N) in numpy FFT index order."""
    n = field.grid.n
    c = field.coeffs
    full = np.zeros((field.ncomp, n, n, n), complex)
    full[..., : n // 2 + 1] = c
    # k3 < 0 from Hermitian symmetry: a_{-k} = conj(a_k)
    i = (-np.arange(n)) % n
    for k3 in range(1, n // 2):
        full[..., n - k3] = np.conj(c[:, i][:, :, i][..., k3])
    full[..., n // 2] = 0.0
    return full


def field_to_bytes(field: SpectralField) -> bytes:
    n = field.grid.n
    full = np.fft.fftshift(_full_lattice(field), axes=(1, 2, 3))
    body = np.moveaxis(full, 0, -1)  # (k1, k2, k3, comp)
    pairs = np.stack([body.real, body.imag], axis=-1).astype("<f8")
    return _HEAD.pack(b"SFLD", VERSION, n, field.ncomp) + pairs.tobytes()


def _parse_field(buf: bytes, offset: int = 0) -> tuple[SpectralField, int]:
    magic, version, n, ncomp = _HEAD.unpack_from(buf, offset)
    if magic != b"SFLD":
        raise ValueError("not an SFLD block")
    if version != VERSION:
        raise ValueError(f"unsupported SFLD version {version}")
    offset += _HEAD.size
    count = n * n * n * ncomp * 2
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=offset)
    offset += count * 8
    body = data.reshape(n, n, n, ncomp, 2)
    full = np.moveaxis(body[..., 0] + 1j * body[..., 1], -1, 0)
    full = np.fft.ifftshift(full, axes=(1, 2, 3))
    return SpectralField(get_grid(n), full[..., : n // 2 + 1]), offset


def field_from_bytes(buf: bytes) -> SpectralField:
    return _parse_field(buf)[0]


def trajectory_to_bytes(traj: Trajectory) -> bytes:
    parts = [_TRJ.pack(b"STRJ", VERSION, len(traj))]
    for t, f in traj:
        parts.append(_TIME.pack(t))
        parts.append(field_to_bytes(f))
    return b"".join(parts)


def trajectory_from_bytes(buf: bytes) -> Trajectory:
    magic, version, count = _TRJ.unpack_from(buf, 0)
    if magic != b"STRJ":
        raise ValueError("not an STRJ block")
    if version != VERSION:
        raise ValueError(f"unsupported STRJ version {version}")
    offset = _TRJ.size
    times, fields = [], []
    for _ in range(count):
        (t,) = _TIME.unpack_from(buf, offset)
        offset += _TIME.size
        f, offset = _parse_field(buf, offset)
        times.append(t)
        fields.append(f)
    return Trajectory.from_fields(times, fields)


def write_field(path, field: SpectralField) -> None:
    Path(path).write_bytes(field_to_bytes(field))


def read_field(path) -> SpectralField:
    return field_from_bytes(Path(path).read_bytes())


def write_trajectory(path, traj: Trajectory) -> None:
    Path(path).write_bytes(trajectory_to_bytes(traj))


def read_trajectory(path) -> Trajectory:
    return trajectory_from_bytes(Path(path).read_bytes())
