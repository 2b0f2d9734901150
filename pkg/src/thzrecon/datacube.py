"""Dense 3D datacubes, observation masks, noise/subsampling generators, metrics, file IO.

A cube holds one real waveform per spatial pixel. Arrays are shaped
``(nb, ny, nx)`` so that C-order flat memory matches the serialized layout:
x varies fastest, then y, then the temporal band, i.e. flat index
``v = (t * ny + y) * nx + x``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

CUBE_MAGIC = b"THZC"
MASK_MAGIC = b"THZM"
FORMAT_VERSION = 1

# refuse to allocate cubes from hostile headers
_MAX_VOXELS = 1 << 31


class FormatError(Exception):
    """A cube/mask/dictionary file failed validation."""


def _own(a: np.ndarray, dtype) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype != dtype or not a.flags.c_contiguous:
        a = np.ascontiguousarray(a, dtype=dtype)
    if a.flags.writeable:
        a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Datacube:
    """Immutable 3D sample array, shape (nb, ny, nx), float64.

    The constructor takes ownership of the array and marks it read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 3:
            raise ValueError(f"cube data must be 3-D, got shape {a.shape}")
        if min(a.shape) < 1:
            raise ValueError(f"cube dims must all be >= 1, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("cube contains NaN or Inf values")
        object.__setattr__(self, "data", _own(a, np.float64))

    @property
    def nx(self) -> int:
        return self.data.shape[2]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def nb(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nb)"""
        return (self.nx, self.ny, self.nb)

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat view in linear-index order (x fastest, then y, then t)."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class Mask:
    """Boolean observation pattern aligned with a Datacube, shape (nb, ny, nx)."""

    observed: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.observed)
        if a.ndim != 3:
            raise ValueError(f"mask must be 3-D, got shape {a.shape}")
        if min(a.shape) < 1:
            raise ValueError(f"mask dims must all be >= 1, got {a.shape}")
        object.__setattr__(self, "observed", _own(a, np.bool_))

    @property
    def nx(self) -> int:
        return self.observed.shape[2]

    @property
    def ny(self) -> int:
        return self.observed.shape[1]

    @property
    def nb(self) -> int:
        return self.observed.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nb)

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())

    @property
    def rate(self) -> float:
        """Observed fraction of all voxels, in [0, 1]."""
        return self.n_observed / self.observed.size

    def all_observed(self) -> bool:
        return bool(self.observed.all())


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise target. ``target_snr_db = inf`` bypasses."""

    target_snr_db: float
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.target_snr_db):
            raise ValueError("target_snr_db must not be NaN")


def snr_db(reference: Datacube, estimate: Datacube) -> float:
    """10*log10(||x||^2 / ||x - xhat||^2) in dB.

    Returns math.inf when the estimate matches the reference exactly, so
    metric tables can be produced uniformly.
    """
    if reference.dims != estimate.dims:
        raise ValueError(f"dimension mismatch: {reference.dims} vs {estimate.dims}")
    ref = reference.data
    err = ref - estimate.data
    p_sig = float(np.dot(ref.reshape(-1), ref.reshape(-1)))
    if p_sig == 0.0:
        raise ValueError("reference cube is identically zero")
    p_err = float(np.dot(err.reshape(-1), err.reshape(-1)))
    if p_err == 0.0:
        return math.inf
    return 10.0 * math.log10(p_sig / p_err)


def add_gaussian_noise(x: Datacube, spec: NoiseSpec) -> Datacube:
    """Add i.i.d. zero-mean Gaussian noise scaled to hit the target input SNR.

    The noise variance is ``||x||^2 / (p * 10^(snr/10))`` with p the voxel
    count. Deterministic given ``spec.seed``; an infinite target returns the
    input unchanged.
    """
    if math.isinf(spec.target_snr_db) and spec.target_snr_db > 0:
        return x
    p = x.size
    power = float(np.dot(x.values, x.values))
    if power == 0.0:
        raise ValueError("cannot scale noise against a zero-power cube")
    sigma = math.sqrt(power / (p * 10.0 ** (spec.target_snr_db / 10.0)))
    rng = np.random.default_rng(spec.seed)
    return Datacube(x.data + sigma * rng.standard_normal(x.data.shape))


def subsample(
    x: Datacube, rate: float, mode: str = "spatial-shared", seed: int = 0
) -> tuple[Datacube, Mask]:
    """Randomly keep a fraction of the cube; everything else becomes 0 / unobserved.

    ``spatial-shared`` keeps ``round(rate * nx * ny)`` whole pixel columns
    (each selected pixel retains its full waveform). ``voxelwise`` keeps
    ``round(rate * p)`` voxels independently. Deterministic given ``seed``.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    nb, ny, nx = x.data.shape
    if mode == "spatial-shared":
        npix = nx * ny
        keep = int(math.floor(rate * npix + 0.5))
        flat = np.zeros(npix, dtype=bool)
        flat[rng.choice(npix, size=keep, replace=False)] = True
        observed = np.broadcast_to(flat.reshape(1, ny, nx), (nb, ny, nx)).copy()
    elif mode == "voxelwise":
        p = x.size
        keep = int(math.floor(rate * p + 0.5))
        flat = np.zeros(p, dtype=bool)
        flat[rng.choice(p, size=keep, replace=False)] = True
        observed = flat.reshape(nb, ny, nx)
    else:
        raise ValueError(f"unknown subsampling mode {mode!r}")
    y = np.where(observed, x.data, 0.0)
    return Datacube(y), Mask(observed)


# ---------------------------------------------------------------------------
# file formats
#
# Cube:  magic "THZC", u32 version=1, u32 nx, u32 ny, u32 nb,
#        then nx*ny*nb little-endian float64 in linear-index order.
# Mask:  magic "THZM", same header, then one u8 (0/1) per voxel.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIII")


def _pack_header(magic: bytes, nx: int, ny: int, nb: int) -> bytes:
    return _HEADER.pack(magic, FORMAT_VERSION, nx, ny, nb)


def _read_header(raw: bytes, magic: bytes, path) -> tuple[int, int, int]:
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for header")
    got, version, nx, ny, nb = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if min(nx, ny, nb) < 1:
        raise FormatError(f"{path}: non-positive dimension ({nx}, {ny}, {nb})")
    if nx * ny * nb > _MAX_VOXELS:
        raise FormatError(f"{path}: dimension overflow ({nx}*{ny}*{nb})")
    return nx, ny, nb


def write_cube(x: Datacube, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_pack_header(CUBE_MAGIC, x.nx, x.ny, x.nb))
        fh.write(x.data.astype("<f8", copy=False).tobytes())


def read_cube(path) -> Datacube:
    with open(path, "rb") as fh:
        raw = fh.read()
    nx, ny, nb = _read_header(raw, CUBE_MAGIC, path)
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != nx * ny * nb:
        raise FormatError(
            f"{path}: truncated payload, expected {nx * ny * nb} values, got {payload.size}"
        )
    try:
        return Datacube(payload.reshape(nb, ny, nx))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_mask(m: Mask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_pack_header(MASK_MAGIC, m.nx, m.ny, m.nb))
        fh.write(m.observed.astype(np.uint8).tobytes())


def read_mask(path) -> Mask:
    with open(path, "rb") as fh:
        raw = fh.read()
    nx, ny, nb = _read_header(raw, MASK_MAGIC, path)
    payload = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
    if payload.size != nx * ny * nb:
        raise FormatError(
            f"{path}: truncated payload, expected {nx * ny * nb} bytes, got {payload.size}"
        )
    if not np.isin(payload, (0, 1)).all():
        raise FormatError(f"{path}: mask bytes must be 0 or 1")
    return Mask(payload.reshape(nb, ny, nx).astype(bool))


def write_slice_csv(x: Datacube, band: int, path) -> None:
    """Export one temporal band as CSV, y rows by x columns."""
    if not 0 <= band < x.nb:
        raise ValueError(f"band {band} out of range [0, {x.nb})")
    np.savetxt(path, x.data[band], delimiter=",")


def write_slice_pgm(x: Datacube, band: int, path) -> None:
    """Export one temporal band as binary 8-bit PGM, min-max normalized."""
    if not 0 <= band < x.nb:
        raise ValueError(f"band {band} out of range [0, {x.nb})")
    sl = x.data[band]
    lo, hi = float(sl.min()), float(sl.max())
    if hi > lo:
        img = np.round((sl - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros(sl.shape, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{x.nx} {x.ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
