import numpy as np
import pytest
from PIL import Image

from skyblendr import blending


def test_harmonization_params_validation():
    blending.HarmonizationParams()
    with pytest.raises(ValueError, match="alpha"):
        blending.HarmonizationParams(alpha=-0.1)
    with pytest.raises(ValueError, match="beta"):
        blending.HarmonizationParams(beta=0.0)
    with pytest.raises(ValueError, match="threshold"):
        blending.HarmonizationParams(sky_region_threshold=1.0)


def test_weather_layer_validation():
    frame = np.zeros((4, 4, 3))
    blending.WeatherLayer(kind="rain", frames=(frame,), opacity=0.5)
    with pytest.raises(ValueError, match="kind"):
        blending.WeatherLayer(kind="snow", frames=(frame,), opacity=0.5)
    with pytest.raises(ValueError, match="opacity"):
        blending.WeatherLayer(kind="rain", frames=(frame,), opacity=1.5)
    with pytest.raises(ValueError, match="at least one"):
        blending.WeatherLayer(kind="rain", frames=(), opacity=0.5)
    with pytest.raises(ValueError, match="RGB"):
        blending.WeatherLayer(kind="rain", frames=(np.zeros((4, 4)),), opacity=0.5)


def test_haze_layer_constant():
    layer = blending.WeatherLayer.haze(0.3, gray=0.7)
    assert layer.kind == "haze"
    assert len(layer.frames) == 1
    assert np.array_equal(layer.frames[0], np.full((2, 2, 3), 0.7))


def test_rain_layer_from_directory(tmp_path):
    for i in range(3):
        arr = np.full((4, 6, 3), i * 40, dtype=np.uint8)
        Image.fromarray(arr).save(tmp_path / f"rain_{i:03d}.png")
    layer = blending.WeatherLayer.rain_from_dir(tmp_path, 0.6)
    assert len(layer.frames) == 3
    assert layer.frames[1][0, 0, 0] == pytest.approx(40 / 255.0)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ValueError, match="no numbered images"):
        blending.WeatherLayer.rain_from_dir(empty, 0.5)
    with pytest.raises(FileNotFoundError):
        blending.WeatherLayer.rain_from_dir(tmp_path / "missing", 0.5)


class TestRegionMeans:
    def test_all_foreground_falls_back_for_sky(self, rng):
        frame = rng.random((8, 9, 3))
        background = rng.random((8, 9, 3))
        matte = np.zeros((8, 9))
        mu_fg, mu_sky, mu_frame = blending.region_means(
            frame, background, matte, 0.5)
        assert np.array_equal(mu_fg, frame.reshape(-1, 3).mean(axis=0))
        assert np.array_equal(mu_sky, background.reshape(-1, 3).mean(axis=0))
        assert np.array_equal(mu_frame, mu_fg)

    def test_all_sky_falls_back_for_foreground(self, rng):
        frame = rng.random((8, 9, 3))
        background = rng.random((8, 9, 3))
        matte = np.ones((8, 9))
        mu_fg, mu_sky, mu_frame = blending.region_means(
            frame, background, matte, 0.5)
        assert np.array_equal(mu_fg, frame.reshape(-1, 3).mean(axis=0))
        assert np.array_equal(mu_sky, background.reshape(-1, 3).mean(axis=0))

    def test_constant_frame(self, rng):
        frame = np.full((6, 6, 3), 0.2)
        background = rng.random((6, 6, 3))
        matte = (rng.random((6, 6)) > 0.5).astype(float)
        mu_fg, _, mu_frame = blending.region_means(frame, background, matte, 0.5)
        assert np.allclose(mu_fg, 0.2, atol=1e-15)
        assert np.allclose(mu_frame, 0.2, atol=1e-15)

    def test_half_half_split(self):
        frame = np.empty((4, 4, 3))
        frame[:2] = (0.1, 0.2, 0.3)
        frame[2:] = (0.9, 0.8, 0.7)
        background = np.full((4, 4, 3), 0.5)
        background[:2] = (0.4, 0.5, 0.6)
        matte = np.zeros((4, 4))
        matte[:2] = 1.0  # top half is sky
        mu_fg, mu_sky, mu_frame = blending.region_means(
            frame, background, matte, 0.5)
        assert np.allclose(mu_fg, [0.9, 0.8, 0.7], atol=1e-15)
        assert np.allclose(mu_sky, [0.4, 0.5, 0.6], atol=1e-15)
        assert np.allclose(mu_frame, [0.5, 0.5, 0.5], atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            blending.region_means(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)),
                                  np.zeros((4, 4)), 0.5)


class TestRecolor:
    def test_alpha_zero_identity(self, rng):
        frame = rng.random((5, 5, 3))
        means = (np.array([0.2, 0.2, 0.2]), np.array([0.8, 0.8, 0.8]), None)
        out = blending.recolor(frame, means, 0.0)
        assert np.array_equal(out, frame)

    def test_equal_means_identity(self, rng):
        frame = rng.random((5, 5, 3))
        mu = np.array([0.4, 0.5, 0.6])
        out = blending.recolor(frame, (mu, mu.copy(), None), 0.7)
        assert np.array_equal(out, frame)

    def test_known_shift(self):
        frame = np.full((3, 3, 3), 0.4)
        mu_fg = np.array([0.0, 0.4, 0.2])
        mu_sky = np.array([0.1, 0.0, 0.2])
        out = blending.recolor(frame, (mu_fg, mu_sky, None), 0.5)
        assert np.allclose(out[0, 0], [0.45, 0.20, 0.40], atol=1e-15)

    def test_unclamped(self):
        frame = np.full((2, 2, 3), 0.9)
        means = (np.zeros(3), np.ones(3), None)
        out = blending.recolor(frame, means, 0.5)
        assert out.max() == pytest.approx(1.4, abs=1e-15)


class TestRelight:
    def test_fixed_point(self, rng):
        frame = rng.random((6, 7, 3))
        mu = frame.reshape(-1, 3).mean(axis=0)
        out = blending.relight(frame, mu, 1.0)
        assert np.array_equal(out, frame)

    def test_constant_offset_cancels(self, rng):
        frame = rng.random((6, 7, 3)) * 0.8
        mu = frame.reshape(-1, 3).mean(axis=0)
        out = blending.relight(frame + 0.1, mu, 1.0)
        assert np.abs(out - frame).max() < 1e-12

    def test_beta_scales(self):
        frame = np.full((4, 4, 3), 0.5)
        out = blending.relight(frame, np.full(3, 0.5), 0.8)
        assert np.allclose(out, 0.4, atol=1e-15)

    def test_clamps_after(self):
        frame = np.full((4, 4, 3), 0.9)
        out = blending.relight(frame, np.full(3, 1.5), 1.0)
        assert out.max() <= 1.0


class TestAlphaBlend:
    def test_matte_zero_keeps_frame(self, rng):
        frame = rng.random((5, 8, 3))
        background = rng.random((5, 8, 3))
        out = blending.alpha_blend(frame, background, np.zeros((5, 8)))
        assert np.array_equal(out, frame)

    def test_matte_one_takes_background(self, rng):
        frame = rng.random((5, 8, 3))
        background = rng.random((5, 8, 3))
        out = blending.alpha_blend(frame, background, np.ones((5, 8)))
        assert np.array_equal(out, background)

    def test_quarter_blend(self):
        out = blending.alpha_blend(np.zeros((3, 3, 3)), np.ones((3, 3, 3)),
                                   np.full((3, 3), 0.25))
        assert np.allclose(out, 0.25, atol=1e-15)

    def test_convexity(self, rng):
        frame = rng.random((10, 10, 3))
        background = rng.random((10, 10, 3))
        matte = rng.random((10, 10))
        out = blending.alpha_blend(frame, background, matte)
        lo = np.minimum(frame, background)
        hi = np.maximum(frame, background)
        assert (out >= lo - 1e-12).all()
        assert (out <= hi + 1e-12).all()

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            blending.alpha_blend(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)),
                                 np.zeros((5, 4)))


class TestScreenBlend:
    def _layer(self, value, opacity=1.0, n=1):
        frames = tuple(np.full((4, 4, 3), value + 0.1 * i) for i in range(n))
        return blending.WeatherLayer(kind="haze", frames=frames, opacity=opacity)

    def test_zero_layer_identity(self, rng):
        base = rng.random((4, 4, 3))
        out = blending.screen_blend(base, self._layer(0.0), 0)
        assert np.array_equal(out, base)

    def test_full_layer_absorbs(self, rng):
        base = rng.random((4, 4, 3))
        out = blending.screen_blend(base, self._layer(1.0), 0)
        assert np.allclose(out, 1.0, atol=1e-15)

    def test_half_over_half(self):
        base = np.full((4, 4, 3), 0.5)
        out = blending.screen_blend(base, self._layer(0.5), 0)
        assert np.allclose(out, 0.75, atol=1e-15)

    def test_commutative_in_scaled_layer(self, rng):
        a = rng.random((4, 4, 3))
        b = rng.random((4, 4, 3))
        layer_b = blending.WeatherLayer(kind="haze", frames=(b,), opacity=1.0)
        layer_a = blending.WeatherLayer(kind="haze", frames=(a,), opacity=1.0)
        ab = blending.screen_blend(a, layer_b, 0)
        ba = blending.screen_blend(b, layer_a, 0)
        assert np.abs(ab - ba).max() < 1e-15

    def test_monotone_in_base(self, rng):
        base = rng.random((4, 4, 3))
        brighter = np.clip(base + 0.1, 0.0, 1.0)
        layer = self._layer(0.5, opacity=0.7)
        assert (blending.screen_blend(brighter, layer, 0)
                >= blending.screen_blend(base, layer, 0) - 1e-15).all()

    def test_cycles_frames_by_index(self):
        layer = self._layer(0.2, n=3)
        base = np.zeros((4, 4, 3))
        for idx in range(7):
            out = blending.screen_blend(base, layer, idx)
            expected = layer.opacity * layer.frames[idx % 3]
            assert np.allclose(out, expected, atol=1e-15)

    def test_resizes_layer_to_base(self):
        layer = blending.WeatherLayer.haze(1.0, gray=0.5)
        base = np.zeros((9, 13, 3))
        out = blending.screen_blend(base, layer, 0)
        assert out.shape == (9, 13, 3)
        assert np.allclose(out, 0.5, atol=1e-15)


class TestHarmonizeAndCompose:
    def test_neutral_params_reduce_to_alpha_blend(self, rng):
        frame = rng.random((8, 10, 3))
        background = rng.random((8, 10, 3))
        matte = rng.random((8, 10))
        params = blending.HarmonizationParams(alpha=0.0, beta=1.0)
        out = blending.harmonize_and_compose(frame, background, matte, params)
        assert np.array_equal(out, blending.alpha_blend(frame, background, matte))

    def test_no_sky_neutral_params_is_identity(self, rng):
        frame = rng.random((8, 10, 3))
        background = rng.random((8, 10, 3))
        params = blending.HarmonizationParams(alpha=0.0, beta=1.0)
        out = blending.harmonize_and_compose(frame, background,
                                             np.zeros((8, 10)), params)
        assert np.array_equal(out, frame)

    def test_matches_manual_composition(self, rng):
        frame = rng.random((12, 14, 3))
        background = rng.random((12, 14, 3))
        matte = rng.random((12, 14))
        params = blending.HarmonizationParams()
        layers = (blending.WeatherLayer.haze(0.25, gray=0.6),)
        got = blending.harmonize_and_compose(frame, background, matte, params,
                                             layers=layers, frame_index=4)
        means = blending.region_means(frame, background, matte,
                                      params.sky_region_threshold)
        step = blending.recolor(frame, means, params.alpha)
        step = blending.relight(step, means[2], params.beta)
        step = blending.alpha_blend(step, background, matte)
        step = blending.screen_blend(step, layers[0], 4)
        want = np.clip(step, 0.0, 1.0)
        assert np.array_equal(got, want)

    def test_output_in_unit_interval(self, rng):
        frame = rng.random((10, 10, 3))
        background = rng.random((10, 10, 3))
        matte = rng.random((10, 10))
        params = blending.HarmonizationParams(alpha=2.0, beta=1.4)
        out = blending.harmonize_and_compose(frame, background, matte, params)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_layers_apply_in_order(self, rng):
        frame = rng.random((6, 6, 3))
        background = rng.random((6, 6, 3))
        matte = rng.random((6, 6))
        params = blending.HarmonizationParams(alpha=0.0, beta=1.0)
        rain = blending.WeatherLayer(
            kind="rain", frames=(rng.random((6, 6, 3)),), opacity=0.8)
        haze = blending.WeatherLayer.haze(0.3)
        got = blending.harmonize_and_compose(frame, background, matte, params,
                                             layers=(rain, haze))
        base = blending.alpha_blend(frame, background, matte)
        want = np.clip(
            blending.screen_blend(blending.screen_blend(base, rain, 0), haze, 0),
            0.0, 1.0)
        assert np.array_equal(got, want)
