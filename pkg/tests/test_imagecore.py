import numpy as np
import pytest
from PIL import Image as PILImage

from conftest import checkerboard, naive_window_stats, random_image
from texadiff.errors import DimensionError
from texadiff.imagecore import (
    Image,
    gaussian_blur,
    gaussian_kernel1d,
    gaussian_window_stats,
    load_image,
    resize,
    save_image,
    to_grayscale,
)


class TestPngIO:
    def test_white_png_maps_to_one(self, tmp_path):
        path = tmp_path / "w.png"
        PILImage.fromarray(np.full((2, 2), 255, np.uint8), "L").save(path)
        img = load_image(path)
        assert np.all(img.data == 1.0)

    def test_black_pixel_maps_to_zero(self, tmp_path):
        path = tmp_path / "b.png"
        PILImage.fromarray(np.zeros((1, 1), np.uint8), "L").save(path)
        assert np.all(load_image(path).data == 0.0)

    def test_byte_ladder(self, tmp_path):
        path = tmp_path / "l.png"
        raw = np.arange(9, dtype=np.uint8).reshape(3, 3)
        PILImage.fromarray(raw, "L").save(path)
        img = load_image(path)
        expect = raw.astype(np.float32) / 255.0
        assert np.array_equal(img.data[:, :, 0], expect)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "nope.png")

    def test_unsupported_mode(self, tmp_path):
        path = tmp_path / "deep.png"
        PILImage.fromarray(np.zeros((2, 2), np.uint16)).save(path)
        with pytest.raises(ValueError, match="unsupported"):
            load_image(path)

    def test_roundtrip_zeros(self, tmp_path):
        img = Image(np.zeros((4, 4, 1), np.float32))
        save_image(img, tmp_path / "z.png")
        assert np.array_equal(load_image(tmp_path / "z.png").data, img.data)

    def test_roundtrip_random_within_quantum(self, tmp_path, rng):
        img = random_image(rng, 7, 5, 3)
        save_image(img, tmp_path / "r.png")
        back = load_image(tmp_path / "r.png")
        assert np.abs(back.data - img.data).max() <= 1.0 / 255.0 + 1e-7

    def test_roundtrip_keeps_channels(self, tmp_path, rng):
        img = random_image(rng, 3, 3, 1)
        save_image(img, tmp_path / "g.png")
        assert load_image(tmp_path / "g.png").channels == 1


class TestGrayscale:
    def test_white(self):
        img = Image(np.ones((2, 2, 3), np.float32))
        assert np.allclose(to_grayscale(img).data, 1.0)

    def test_pure_red(self):
        arr = np.zeros((2, 2, 3), np.float32)
        arr[:, :, 0] = 1.0
        assert np.allclose(to_grayscale(Image(arr)).data, 0.299)

    def test_matches_dot_product(self, rng):
        img = random_image(rng, 6, 4, 3)
        gray = to_grayscale(img).data[:, :, 0]
        expect = img.data.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
        assert np.abs(gray - expect).max() < 1e-7

    def test_range_property(self, rng):
        for _ in range(20):
            img = random_image(rng, 5, 5, 3)
            g = to_grayscale(img).data
            assert g.min() >= 0.0 and g.max() <= 1.0

    def test_identity_on_single_channel(self, rng):
        img = random_image(rng, 4, 4, 1)
        assert to_grayscale(img) is img


class TestWindowStats:
    def test_constant_pair(self):
        img = Image(np.full((8, 8, 1), 0.5, np.float32))
        s = gaussian_window_stats(img, img)
        assert np.allclose(s.mu_a, 0.5)
        assert np.allclose(s.var_a, 0.0, atol=1e-12)
        assert np.allclose(s.cov_ab, 0.0, atol=1e-12)

    def test_identical_inputs(self, rng):
        img = random_image(rng, 10, 10)
        s = gaussian_window_stats(img, img)
        assert np.array_equal(s.var_a, s.var_b)
        assert np.abs(s.cov_ab - s.var_a).max() < 1e-12

    def test_ramp_vs_constant_matches_oracle(self):
        ramp = Image((np.tile(np.linspace(0, 1, 5), (5, 1))).astype(np.float32)[:, :, None])
        const = Image(np.full((5, 5, 1), 0.3, np.float32))
        s = gaussian_window_stats(ramp, const, window=3, sigma=1.5)
        mu_a, mu_b, var_a, var_b, cov = naive_window_stats(
            ramp.data[:, :, 0], const.data[:, :, 0], 3, 1.5
        )
        for got, want in [(s.mu_a, mu_a), (s.mu_b, mu_b), (s.var_a, var_a),
                          (s.var_b, np.maximum(var_b, 0)), (s.cov_ab, cov)]:
            assert np.abs(got - want).max() <= 1e-6

    def test_oracle_equivalence_random(self, rng):
        a = random_image(rng, 32, 32)
        b = random_image(rng, 32, 32)
        s = gaussian_window_stats(a, b)
        mu_a, mu_b, var_a, var_b, cov = naive_window_stats(
            a.data[:, :, 0], b.data[:, :, 0], 11, 1.5
        )
        assert np.abs(s.mu_a - mu_a).max() <= 1e-6
        assert np.abs(s.var_a - np.maximum(var_a, 0)).max() <= 1e-6
        assert np.abs(s.cov_ab - cov).max() <= 1e-6

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            gaussian_window_stats(random_image(rng, 4, 4), random_image(rng, 5, 4))

    def test_even_window_rejected(self, rng):
        img = random_image(rng, 4, 4)
        with pytest.raises(ValueError):
            gaussian_window_stats(img, img, window=4)


class TestBlur:
    def test_constant_unchanged(self):
        img = Image(np.full((9, 9, 1), 0.7, np.float32))
        out = gaussian_blur(img, 2.0)
        assert np.abs(out.data - 0.7).max() < 1e-7

    def test_impulse_gives_kernel(self):
        arr = np.zeros((9, 9, 1), np.float32)
        arr[4, 4, 0] = 1.0
        out = gaussian_blur(Image(arr), 1.0).data[:, :, 0]
        k = gaussian_kernel1d(1.0, 3)
        expect = np.zeros((9, 9))
        expect[1:8, 1:8] = np.outer(k, k)
        assert np.abs(out - expect).max() < 1e-7

    def test_semigroup(self, rng):
        img = random_image(rng, 24, 24)
        twice = gaussian_blur(gaussian_blur(img, 1.0), 1.0)
        once = gaussian_blur(img, np.sqrt(2.0))
        inner = np.abs(twice.data - once.data)[4:-4, 4:-4]
        assert inner.max() <= 1e-2

    def test_mean_preserved(self, rng):
        img = random_image(rng, 16, 16)
        out = gaussian_blur(img, 1.5)
        assert abs(float(out.data.mean()) - float(img.data.mean())) <= 1e-4

    def test_nonpositive_sigma(self, rng):
        with pytest.raises(ValueError):
            gaussian_blur(random_image(rng, 4, 4), 0.0)

    def test_translation_equivariance(self, rng):
        base = rng.random((20, 20)).astype(np.float32)
        shifted = np.roll(base, 1, axis=1)
        a = gaussian_blur(Image(base[:, :, None]), 1.0).data[:, :, 0]
        b = gaussian_blur(Image(shifted[:, :, None]), 1.0).data[:, :, 0]
        assert np.abs(a[5:-5, 5:-6] - b[5:-5, 6:-5]).max() < 1e-7


class TestResize:
    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic", "area"])
    def test_identity(self, rng, mode):
        img = random_image(rng, 6, 7)
        out = resize(img, 6, 7, mode)
        assert np.abs(out.data - img.data).max() < 1e-6

    def test_area_constant(self):
        img = Image(np.full((8, 8, 1), 0.4, np.float32))
        out = resize(img, 2, 2, "area")
        assert np.abs(out.data - 0.4).max() < 1e-7

    def test_area_block_means(self, rng):
        img = random_image(rng, 4, 4)
        out = resize(img, 2, 2, "area").data[:, :, 0]
        blocks = img.data[:, :, 0].astype(np.float64).reshape(2, 2, 2, 2).mean(axis=(1, 3))
        assert np.abs(out - blocks).max() <= 1e-7

    def test_zero_target_rejected(self, rng):
        with pytest.raises(DimensionError):
            resize(random_image(rng, 4, 4), 0, 4)

    def test_unknown_mode(self, rng):
        with pytest.raises(ValueError):
            resize(random_image(rng, 4, 4), 2, 2, "lanczos")

    def test_downsample_translation_equivariance(self, rng):
        base = rng.random((32, 32)).astype(np.float32)
        shifted = np.roll(base, 2, axis=0)  # one output pixel at scale 2
        a = resize(Image(base[:, :, None]), 16, 16, "area").data[:, :, 0]
        b = resize(Image(shifted[:, :, None]), 16, 16, "area").data[:, :, 0]
        assert np.abs(a[4:-5, 4:-4] - b[5:-4, 4:-4]).max() < 1e-7

    def test_upsample_grid_consistency(self):
        img = checkerboard(8, 8, period=4)
        up = resize(img, 16, 16, "nearest").data[:, :, 0]
        assert np.array_equal(up[::2, ::2], img.data[:, :, 0])
