"""Deterministic synthetic datacubes with known ground truth.

Two generators: a layered reflection scene (front surface plus a buried
shape with front/back echoes at known sample delays) and a spectral scene
(each pixel carries one of a few fixed component waveforms). Both are pure
functions of their spec, bit-identical across runs for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datacube import Datacube

# amplitude of the trailing negative lobe relative to an echo's main peak,
# and the lobe separation in units of the pulse width
REBOUND_FRACTION = 0.35
REBOUND_DELAY = 2.0

# post-pulse oscillation burst (instrument/etalon ringing), relative to the
# main peak; centered RING_CENTER pulse-widths after it and kept short so it
# decays before the next echo, well below any peak-detection threshold
RING_AMPLITUDE = 0.12
RING_CENTER = 4.0
RING_WIDTH = 1.2
RING_FREQ = 0.45

# smooth background texture modulating the surface echo, relative to its amplitude
TEXTURE_AMPLITUDE = 0.05


def echo_pulse(t: np.ndarray, center: float, width: float) -> np.ndarray:
    """Reflection transient: bipolar main lobe plus a weak trailing ring.

    The absolute maximum stays within a fraction of a sample of ``center``;
    the negative rebound sits ``REBOUND_DELAY * width`` samples later and
    the ring burst ``RING_CENTER`` widths after the peak, so peak timing
    read off the waveform matches the requested delay.
    """
    u = (t - center) / width
    main = np.exp(-0.5 * u**2)
    rebound = np.exp(-0.5 * (u - REBOUND_DELAY) ** 2)
    ring = (
        RING_AMPLITUDE
        * np.sin(2.0 * np.pi * RING_FREQ * u)
        * np.exp(-0.5 * ((u - RING_CENTER) / RING_WIDTH) ** 2)
    )
    return main - REBOUND_FRACTION * rebound + ring


def _texture(nx: int, ny: int, seed: int) -> np.ndarray:
    """Smooth low-frequency field on the pixel grid, normalized to max |.| = 1."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:ny, 0:nx].astype(float)
    scale = float(max(nx, ny))
    f = np.zeros((ny, nx))
    for _ in range(3):
        cycles = rng.uniform(0.5, 1.5)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        f += np.cos(
            2.0 * np.pi * cycles * (np.cos(theta) * xx + np.sin(theta) * yy) / scale
            + phase
        )
    peak = np.abs(f).max()
    return f / peak if peak > 0 else f


def t_shape_mask(nx: int, ny: int) -> np.ndarray:
    """Boolean (ny, nx) map of a capital-T footprint, proportional to the grid."""
    m = np.zeros((ny, nx), dtype=bool)
    bar_top, bar_bot = round(0.18 * ny), round(0.38 * ny)
    bar_lo, bar_hi = round(0.16 * nx), round(0.84 * nx)
    stem_lo, stem_hi = round(0.41 * nx), round(0.59 * nx)
    stem_bot = round(0.82 * ny)
    m[bar_top:bar_bot, bar_lo:bar_hi] = True
    m[bar_bot:stem_bot, stem_lo:stem_hi] = True
    return m


@dataclass(frozen=True)
class LayeredPhantomSpec:
    """Geometry and echo timing of the buried-shape scene.

    ``shape`` is a (ny, nx) boolean map indexed [y, x]; pixels inside carry
    the two buried-layer echoes in addition to the surface echo. Delays are
    in temporal samples. ``surface_tilt`` shifts echo timing linearly across
    the field (samples of delay from one edge to the other per axis), the
    way a sample that is not perfectly perpendicular to the beam would; the
    buried echoes ride the same shift, so depth and thickness delays stay
    exact. Set ``texture_amplitude`` and ``surface_tilt`` to zero for the
    idealized flat scene.
    """

    nx: int = 64
    ny: int = 64
    nb: int = 128
    surface_peak_index: int = 24
    buried_depth_delay: int = 60
    layer_thickness_delay: int = 24
    peak_width: float = 3.0
    shape: np.ndarray = None
    amplitude_ratios: tuple[float, float, float] = (1.0, 0.6, -0.45)
    surface_tilt: tuple[float, float] = (4.0, 2.5)
    texture_amplitude: float = TEXTURE_AMPLITUDE
    seed: int = 0

    def __post_init__(self):
        if self.shape is None:
            object.__setattr__(self, "shape", t_shape_mask(self.nx, self.ny))
        shp = np.asarray(self.shape, dtype=bool)
        if shp.shape != (self.ny, self.nx):
            raise ValueError(
                f"shape map must be (ny, nx) = {(self.ny, self.nx)}, got {shp.shape}"
            )
        object.__setattr__(self, "shape", shp)
        if self.peak_width <= 0:
            raise ValueError("peak_width must be positive")
        if self.texture_amplitude < 0:
            raise ValueError("texture_amplitude must be >= 0")
        tilt = (abs(self.surface_tilt[0]) + abs(self.surface_tilt[1])) / 2.0
        last = (
            self.surface_peak_index
            + tilt
            + self.buried_depth_delay
            + self.layer_thickness_delay
            + 4.0 * self.peak_width
        )
        first = self.surface_peak_index - tilt - 2.0 * self.peak_width
        if first < 0 or last >= self.nb:
            raise ValueError(
                f"echoes exceed the time window: need 0 <= {first:.1f} and "
                f"{last:.1f} < nb = {self.nb}"
            )


def generate_layered(spec: LayeredPhantomSpec) -> Datacube:
    """Render the layered scene.

    Every pixel gets the surface echo, amplitude-modulated by a smooth
    seeded texture and time-shifted by the surface tilt; pixels inside
    ``spec.shape`` additionally get the layer front and back echoes at the
    spec delays after the (shifted) surface echo.
    """
    t = np.arange(spec.nb, dtype=float)[:, None, None]
    tx, ty = spec.surface_tilt
    xg = np.arange(spec.nx, dtype=float) / max(spec.nx - 1, 1) - 0.5
    yg = np.arange(spec.ny, dtype=float) / max(spec.ny - 1, 1) - 0.5
    t0 = spec.surface_peak_index + tx * xg[None, :] + ty * yg[:, None]

    def field(delay: float) -> np.ndarray:
        return echo_pulse(t, t0[None, :, :] + delay, spec.peak_width)

    r_s, r_f, r_b = spec.amplitude_ratios
    amp = r_s * (
        1.0 + spec.texture_amplitude * _texture(spec.nx, spec.ny, spec.seed)
    )
    data = amp[None, :, :] * field(0.0)
    buried = r_f * field(spec.buried_depth_delay) + r_b * field(
        spec.buried_depth_delay + spec.layer_thickness_delay
    )
    data[:, spec.shape] += buried[:, spec.shape]
    return Datacube(data)


@dataclass(frozen=True)
class SpectralPhantomSpec:
    """Per-region component waveforms on a labeled pixel grid.

    ``component_spectra`` is (n_components, nb); ``region_map`` is (ny, nx)
    int labels into it. Generation is deterministic; ``seed`` is carried for
    bookkeeping alongside noise added downstream.
    """

    nx: int
    ny: int
    nb: int
    component_spectra: np.ndarray = None
    region_map: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        if self.component_spectra is None:
            object.__setattr__(
                self, "component_spectra", component_signatures(self.nb, 2, self.seed)
            )
        if self.region_map is None:
            object.__setattr__(self, "region_map", two_region_map(self.nx, self.ny))
        spectra = np.asarray(self.component_spectra, dtype=float)
        labels = np.asarray(self.region_map)
        if spectra.ndim != 2 or spectra.shape[1] != self.nb:
            raise ValueError(
                f"component_spectra must be (n_components, {self.nb}), got {spectra.shape}"
            )
        if labels.shape != (self.ny, self.nx):
            raise ValueError(
                f"region_map must be (ny, nx) = {(self.ny, self.nx)}, got {labels.shape}"
            )
        if labels.min() < 0 or labels.max() >= spectra.shape[0]:
            raise ValueError("region_map labels a component that does not exist")
        object.__setattr__(self, "component_spectra", spectra)
        object.__setattr__(self, "region_map", labels.astype(np.int64))


def two_region_map(nx: int, ny: int) -> np.ndarray:
    """Left/right half-plane labels 0/1."""
    m = np.zeros((ny, nx), dtype=np.int64)
    m[:, nx // 2 :] = 1
    return m


def component_signatures(nb: int, n_components: int, seed: int = 0) -> np.ndarray:
    """Distinct sustained waveforms, one per component, shape (n_components, nb).

    Each is a sum of tones drawn from a frequency band reserved for that
    component (spectroscopy-style line sets). Magnitude spectra of different
    components barely overlap, so cosine matching separates them cleanly.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(nb, dtype=float)
    lo, hi = 0.04, 0.38
    width = (hi - lo) / n_components
    out = np.zeros((n_components, nb))
    for c in range(n_components):
        band = (lo + c * width, lo + (c + 1) * width)
        for _ in range(4):
            freq = rng.uniform(band[0] + 0.1 * width, band[1] - 0.1 * width)
            amp = rng.uniform(0.5, 1.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            out[c] += amp * np.cos(2.0 * np.pi * freq * t + phase)
        # reflectance baseline; distinct per material so block means are informative
        out[c] += 2.0 - 0.5 * c
    return out


def generate_spectral(spec: SpectralPhantomSpec) -> Datacube:
    """Each pixel's waveform is exactly its region's component signature."""
    data = spec.component_spectra[spec.region_map]  # (ny, nx, nb)
    return Datacube(np.ascontiguousarray(data.transpose(2, 0, 1)))
