import numpy as np
import pytest

from thzrecon import (
    LayeredPhantomSpec,
    SpectralPhantomSpec,
    chemical_map,
    generate_layered,
    generate_spectral,
)
from thzrecon.phantom import component_signatures, t_shape_mask, two_region_map


def naive_peaks(w, threshold):
    """Test-local detector: local maxima of |w| above an absolute threshold."""
    s = np.abs(w)
    return [
        i
        for i in range(1, len(s) - 1)
        if s[i] >= s[i - 1] and s[i] > s[i + 1] and s[i] >= threshold
    ]


def flat_spec(**kw):
    base = dict(surface_tilt=(0.0, 0.0), texture_amplitude=0.0)
    base.update(kw)
    return LayeredPhantomSpec(**base)


class TestLayered:
    def test_no_shape_all_waveforms_identical(self):
        spec = flat_spec(shape=np.zeros((64, 64), dtype=bool))
        cube = generate_layered(spec)
        first = cube.data[:, 0, 0]
        assert np.array_equal(cube.data, np.broadcast_to(first[:, None, None], cube.data.shape))

    def test_peak_positions(self):
        spec = flat_spec(
            nx=8, ny=8, nb=160, surface_peak_index=40, buried_depth_delay=60,
            layer_thickness_delay=24, shape=np.ones((8, 8), dtype=bool),
        )
        cube = generate_layered(spec)
        w = cube.data[:, 4, 4]
        peaks = naive_peaks(w, threshold=0.3 * np.abs(w).max())
        # keep the strongest in any 8-sample window to drop rebound lobes
        strongest = []
        for p in sorted(peaks, key=lambda i: -abs(w[i])):
            if all(abs(p - q) >= 8 for q in strongest):
                strongest.append(p)
        strongest.sort()
        assert abs(strongest[0] - 40) <= 1
        assert abs(strongest[1] - 100) <= 1

    def test_t_shape_renders_at_front_delay(self):
        spec = flat_spec()
        cube = generate_layered(spec)
        band = spec.surface_peak_index + spec.buried_depth_delay
        img = np.abs(cube.data[band])
        detected = img > 0.5 * img.max()
        assert np.array_equal(detected, spec.shape)

    def test_background_only_surface_echo(self):
        spec = flat_spec()
        cube = generate_layered(spec)
        outside = ~spec.shape
        w = cube.data[:, outside][:, 0]
        late = np.abs(w[spec.surface_peak_index + 20 :])
        assert late.max() < 0.2 * np.abs(w).max()

    def test_deterministic(self):
        a = generate_layered(LayeredPhantomSpec(seed=3))
        b = generate_layered(LayeredPhantomSpec(seed=3))
        assert np.array_equal(a.data, b.data)

    def test_texture_modulates_surface(self):
        spec = LayeredPhantomSpec(shape=np.zeros((64, 64), dtype=bool),
                                  surface_tilt=(0.0, 0.0))
        cube = generate_layered(spec)
        peak_img = cube.data[spec.surface_peak_index]
        spread = peak_img.max() - peak_img.min()
        assert 0.01 < spread < 0.25

    def test_echoes_must_fit_window(self):
        with pytest.raises(ValueError, match="window"):
            flat_spec(nb=64, surface_peak_index=40, buried_depth_delay=60)

    def test_shape_dims_validated(self):
        with pytest.raises(ValueError, match="shape map"):
            flat_spec(shape=np.zeros((8, 8), dtype=bool))

    def test_tilt_shifts_surface_across_field(self):
        spec = LayeredPhantomSpec(shape=np.zeros((64, 64), dtype=bool),
                                  surface_tilt=(4.0, 0.0), texture_amplitude=0.0)
        cube = generate_layered(spec)
        left = int(np.argmax(np.abs(cube.data[:, 32, 2])))
        right = int(np.argmax(np.abs(cube.data[:, 32, 61])))
        assert right - left >= 3

    def test_t_mask_proportions(self):
        m = t_shape_mask(64, 64)
        assert m.shape == (64, 64)
        assert 0.1 < m.mean() < 0.5


class TestSpectral:
    def test_single_component_ccm_is_one(self):
        sig = component_signatures(64, 1, seed=0)
        spec = SpectralPhantomSpec(
            nx=6, ny=6, nb=64, component_spectra=sig,
            region_map=np.zeros((6, 6), dtype=int),
        )
        cube = generate_spectral(spec)
        cm = chemical_map(cube, (3, 3))
        assert np.allclose(cm.values, 1.0, atol=1e-12)

    def test_orthogonal_regions(self):
        # pure tones in distinct bins: magnitude spectra have disjoint support
        t = np.arange(32.0)
        sigs = np.stack([np.cos(2 * np.pi * 4 * t / 32), np.cos(2 * np.pi * 9 * t / 32)])
        spec = SpectralPhantomSpec(
            nx=4, ny=2, nb=32, component_spectra=sigs,
            region_map=two_region_map(4, 2),
        )
        cube = generate_spectral(spec)
        cm = chemical_map(cube, (0, 0))
        assert np.allclose(cm.values[:, :2], 1.0, atol=1e-9)
        assert np.allclose(cm.values[:, 2:], 0.0, atol=1e-9)

    def test_known_cross_cosine(self):
        # region 0: bin 4 only; region 1: equal energy in bins 4 and 9
        t = np.arange(32.0)
        u = np.cos(2 * np.pi * 4 * t / 32)
        v = np.cos(2 * np.pi * 4 * t / 32) + np.cos(2 * np.pi * 9 * t / 32)
        spec = SpectralPhantomSpec(
            nx=4, ny=2, nb=32, component_spectra=np.stack([u, v]),
            region_map=two_region_map(4, 2),
        )
        cube = generate_spectral(spec)
        cm = chemical_map(cube, (0, 0))
        assert np.allclose(cm.values[:, 2:], 1.0 / np.sqrt(2.0), atol=1e-9)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="component"):
            SpectralPhantomSpec(
                nx=2, ny=2, nb=16,
                component_spectra=np.ones((1, 16)),
                region_map=np.array([[0, 1], [0, 0]]),
            )

    def test_deterministic(self):
        a = generate_spectral(SpectralPhantomSpec(nx=8, ny=8, nb=64, seed=5))
        b = generate_spectral(SpectralPhantomSpec(nx=8, ny=8, nb=64, seed=5))
        assert np.array_equal(a.data, b.data)

    def test_signatures_have_disjoint_bands(self):
        sigs = component_signatures(128, 2, seed=1)
        spec0 = np.abs(np.fft.rfft(sigs[0]))[1:]
        spec1 = np.abs(np.fft.rfft(sigs[1]))[1:]
        cos = np.dot(spec0, spec1) / (np.linalg.norm(spec0) * np.linalg.norm(spec1))
        assert cos < 0.2
