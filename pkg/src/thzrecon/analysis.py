"""Waveform evaluation: reflection timing, magnitude spectra, spectral matching.

Structure measurement reads each pixel's waveform for its first three
prominent reflections: surface, buried-layer front, buried-layer back. The
sample delays between them scale to physical depth and thickness through a
user-supplied millimeters-per-sample calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datacube import Datacube


@dataclass(frozen=True)
class PeakAnalysisConfig:
    """Detector settings for per-pixel reflection timing.

    ``min_prominence`` is the fraction of the waveform's max magnitude below
    which extrema are ignored. ``min_separation`` suppresses secondary lobes
    of one transient; detected peaks closer than this to a stronger peak are
    dropped. ``refine`` switches three-point parabolic sub-sample refinement.
    """

    depth_scale: float
    min_prominence: float = 0.2
    use_abs: bool = True
    min_separation: int = 8
    refine: bool = True

    def __post_init__(self):
        if not 0.0 < self.min_prominence < 1.0:
            raise ValueError("min_prominence must lie in (0, 1)")
        if self.depth_scale <= 0:
            raise ValueError("depth_scale must be positive")
        if self.min_separation < 1:
            raise ValueError("min_separation must be >= 1")


@dataclass(frozen=True)
class StructuralReport:
    """Per-pixel depth/thickness in mm plus aggregates over valid pixels."""

    depth_mm: np.ndarray
    thickness_mm: np.ndarray
    valid: np.ndarray
    depth_mean: float
    depth_std: float
    thickness_mean: float
    thickness_std: float
    n_valid: int


@dataclass(frozen=True)
class ChemicalMap:
    """Per-pixel cosine match against a reference magnitude spectrum."""

    values: np.ndarray
    valid: np.ndarray
    reference: np.ndarray
    reference_id: str


def find_peaks(waveform: np.ndarray, cfg: PeakAnalysisConfig) -> np.ndarray:
    """Prominent peak positions (ascending, sub-sample when refined)."""
    s = np.abs(waveform) if cfg.use_abs else np.asarray(waveform, dtype=float)
    peak = s.max()
    if peak <= 0:
        return np.empty(0)
    thr = cfg.min_prominence * peak
    inner = s[1:-1]
    cand = 1 + np.flatnonzero((inner >= s[:-2]) & (inner > s[2:]) & (inner >= thr))
    if len(cand) == 0:
        return np.empty(0)
    # greedy suppression: strongest first, ties to the earlier sample
    order = cand[np.lexsort((cand, -s[cand]))]
    kept: list[int] = []
    for i in order:
        if all(abs(i - j) >= cfg.min_separation for j in kept):
            kept.append(int(i))
    kept.sort()
    pos = np.array(kept, dtype=float)
    if cfg.refine:
        for n, i in enumerate(kept):
            if 0 < i < len(s) - 1:
                den = s[i - 1] - 2.0 * s[i] + s[i + 1]
                if den < 0:
                    pos[n] = i + 0.5 * (s[i - 1] - s[i + 1]) / den
    return pos


def measure_structure(x: Datacube, cfg: PeakAnalysisConfig) -> StructuralReport:
    """Depth and thickness per pixel from the first three prominent peaks.

    Pixels with fewer than three peaks (background) are flagged invalid and
    excluded from the aggregates.
    """
    if x.nb < 3:
        raise ValueError("need at least 3 temporal samples")
    ny, nx = x.ny, x.nx
    depth = np.full((ny, nx), np.nan)
    thick = np.full((ny, nx), np.nan)
    valid = np.zeros((ny, nx), dtype=bool)
    for yy in range(ny):
        for xx in range(nx):
            peaks = find_peaks(x.data[:, yy, xx], cfg)
            if len(peaks) >= 3:
                valid[yy, xx] = True
                depth[yy, xx] = (peaks[1] - peaks[0]) * cfg.depth_scale
                thick[yy, xx] = (peaks[2] - peaks[1]) * cfg.depth_scale
    n = int(valid.sum())
    if n:
        d, t = depth[valid], thick[valid]
        agg = (float(d.mean()), float(d.std()), float(t.mean()), float(t.std()))
    else:
        agg = (math.nan, math.nan, math.nan, math.nan)
    return StructuralReport(depth, thick, valid, *agg, n_valid=n)


def magnitude_spectrum(waveform: np.ndarray) -> np.ndarray:
    """Modulus of the one-sided DFT, bins 0..floor(B/2)."""
    w = np.asarray(waveform, dtype=np.float64)
    if w.ndim != 1 or len(w) < 2:
        raise ValueError("waveform must be 1-D with at least 2 samples")
    return np.abs(np.fft.rfft(w))


def ccm(reference: np.ndarray, test: np.ndarray) -> float:
    """Cosine of the angle between two spectra; in [0, 1] for magnitudes."""
    u = np.asarray(reference, dtype=np.float64)
    v = np.asarray(test, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"spectrum lengths differ: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cannot match a zero-norm spectrum")
    return float(np.dot(u, v) / (nu * nv))


def chemical_map(
    x: Datacube,
    reference,
    band: tuple[int, int] | None = None,
) -> ChemicalMap:
    """Cosine match of every pixel's magnitude spectrum against a reference.

    ``reference`` is either a (y, x) pixel of the cube or an explicit
    spectrum of length floor(nb/2) + 1. ``band`` optionally restricts the
    comparison to bins [lo, hi). Zero-spectrum pixels are flagged invalid.
    """
    spectra = np.abs(np.fft.rfft(x.data, axis=0))  # (P, ny, nx)
    P = spectra.shape[0]
    if band is not None:
        lo, hi = band
        if not 0 <= lo < hi <= P:
            raise ValueError(f"band {band} out of range for {P} bins")
    else:
        lo, hi = 0, P

    if isinstance(reference, tuple) and len(reference) == 2:
        ry, rx = reference
        ref = spectra[:, ry, rx].copy()
        ref_id = f"pixel({ry},{rx})"
    else:
        ref = np.asarray(reference, dtype=np.float64)
        if ref.shape != (P,):
            raise ValueError(f"reference spectrum must have length {P}")
        ref_id = "spectrum"

    ref_band = ref[lo:hi]
    ref_norm = np.linalg.norm(ref_band)
    if ref_norm == 0:
        raise ValueError("reference spectrum is zero on the selected band")
    sub = spectra[lo:hi]
    norms = np.sqrt(np.einsum("pij,pij->ij", sub, sub))
    valid = norms > 0
    vals = np.full((x.ny, x.nx), np.nan)
    dots = np.einsum("p,pij->ij", ref_band, sub)
    vals[valid] = dots[valid] / (norms[valid] * ref_norm)
    return ChemicalMap(vals, valid, ref, ref_id)
