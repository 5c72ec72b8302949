import numpy as np
import pytest
from scipy.ndimage import convolve1d

from conftest import make_gray
from veinview.frangi import (
    FrangiConfig,
    eigen2x2,
    frangi_multiscale,
    hessian_at_scale,
    vesselness_at_scale,
)
from veinview.frangi import _derivative_kernels
from veinview.imgcore import ImageBuffer


def ridge_image(h, w, sigma_profile, depth=0.7, vertical=True):
    """Bright field with a Gaussian-profile dark ridge through the middle."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    d = (xx - w / 2.0) if vertical else (yy - h / 2.0)
    img = 255.0 * (1.0 - depth * np.exp(-(d * d) / (2.0 * sigma_profile**2)))
    return ImageBuffer(np.clip(np.round(img), 0, 255).astype(np.uint8))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            FrangiConfig(scales=())
        with pytest.raises(ValueError):
            FrangiConfig(scales=(1.0, 1.0))
        with pytest.raises(ValueError):
            FrangiConfig(scales=(2.0, 1.0))
        with pytest.raises(ValueError):
            FrangiConfig(scales=(1.0,), beta=0.0)
        with pytest.raises(ValueError):
            FrangiConfig(scales=(1.0,), c="automatic")
        with pytest.raises(ValueError):
            FrangiConfig(scales=(1.0,), c=-1.0)


class TestEigen2x2:
    def test_diagonal(self):
        pair = eigen2x2(2.0, 0.0, -3.0)
        assert (pair.lambda1, pair.lambda2) == (2.0, -3.0)

    def test_zero(self):
        pair = eigen2x2(0.0, 0.0, 0.0)
        assert (pair.lambda1, pair.lambda2) == (0.0, 0.0)

    def test_antidiagonal_tie_break(self):
        # eigenvalues +/- 1; on magnitude ties the positive one comes first
        pair = eigen2x2(0.0, 1.0, 0.0)
        assert (pair.lambda1, pair.lambda2) == (1.0, -1.0)

    def test_trace_and_determinant(self, rng):
        for _ in range(1000):
            a, b, c = rng.normal(0, 10, 3)
            pair = eigen2x2(a, b, c)
            scale = max(abs(a), abs(b), abs(c), 1.0)
            assert pair.lambda1 + pair.lambda2 == pytest.approx(a + c, rel=1e-6, abs=1e-6 * scale)
            assert pair.lambda1 * pair.lambda2 == pytest.approx(
                a * c - b * b, rel=1e-6, abs=1e-6 * scale**2
            )
            assert abs(pair.lambda1) <= abs(pair.lambda2) + 1e-15


class TestKernels:
    def test_smoother_sums_to_one(self):
        for sigma in (0.8, 1.0, 2.5, 6.0):
            g0, _, _ = _derivative_kernels(sigma)
            assert g0.sum() == pytest.approx(1.0, abs=1e-12)

    def test_second_derivative_moments(self):
        for sigma in (1.0, 3.0):
            _, _, g2 = _derivative_kernels(sigma)
            radius = len(g2) // 2
            t = np.arange(-radius, radius + 1)
            assert g2.sum() == pytest.approx(0.0, abs=1e-12)
            assert (t * t * g2).sum() == pytest.approx(2.0, abs=1e-12)


class TestHessian:
    def test_constant_image_zero(self):
        img = ImageBuffer(np.full((32, 32), 100, dtype=np.uint8))
        field = hessian_at_scale(img, 2.0)
        for plane in (field.hxx, field.hxy, field.hyy):
            assert np.abs(plane).max() < 1e-6

    def test_quadratic_ramp(self):
        w = 64
        ramp = np.tile((np.arange(w, dtype=np.float64) ** 2)[None, :], (w, 1))
        for sigma in (1.0, 2.0, 3.5):
            field = hessian_at_scale(ramp, sigma)
            r = int(np.ceil(4 * sigma)) + 1
            interior = (slice(r, w - r), slice(r, w - r))
            assert np.abs(field.hxx[interior] - 2.0 * sigma * sigma).max() < 1e-3
            assert np.abs(field.hyy[interior]).max() < 1e-3
            assert np.abs(field.hxy[interior]).max() < 1e-3

    def test_bright_blob_center_negative(self):
        n = 65
        yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
        blob = np.exp(-((xx - 32) ** 2 + (yy - 32) ** 2) / (2 * 6.0**2))
        field = hessian_at_scale(blob, 3.0)
        assert field.hxx[32, 32] < 0
        assert field.hyy[32, 32] < 0
        assert field.hxx[32, 32] == pytest.approx(field.hyy[32, 32], rel=1e-3)

    def test_matches_finite_differences_of_smoothed(self):
        rng = np.random.default_rng(7)
        n = 160
        yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
        img = np.zeros((n, n))
        for _ in range(6):
            cx, cy = rng.uniform(40, 120, 2)
            s, a = rng.uniform(10, 16), rng.uniform(-1, 1)
            img += a * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
        for sigma in (1.5, 2.0, 3.0):
            g0, _, _ = _derivative_kernels(sigma)
            smooth = convolve1d(convolve1d(img, g0, axis=1, mode="nearest"), g0, axis=0, mode="nearest")
            s2 = sigma * sigma
            fd_xx = (np.roll(smooth, -1, 1) - 2 * smooth + np.roll(smooth, 1, 1)) * s2
            fd_yy = (np.roll(smooth, -1, 0) - 2 * smooth + np.roll(smooth, 1, 0)) * s2
            fd_xy = (
                np.roll(np.roll(smooth, -1, 0), -1, 1)
                - np.roll(np.roll(smooth, -1, 0), 1, 1)
                - np.roll(np.roll(smooth, 1, 0), -1, 1)
                + np.roll(np.roll(smooth, 1, 0), 1, 1)
            ) / 4.0 * s2
            field = hessian_at_scale(img, sigma)
            r = int(np.ceil(4 * sigma)) + 2
            sl = (slice(r, n - r), slice(r, n - r))
            for got, want in ((field.hxx, fd_xx), (field.hyy, fd_yy), (field.hxy, fd_xy)):
                rel = np.abs(got[sl] - want[sl]).max() / np.abs(want[sl]).max()
                assert rel < 1e-2

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            hessian_at_scale(np.zeros((8, 8)), 0.0)


class TestVesselness:
    def test_constant_is_zero(self):
        img = ImageBuffer(np.full((32, 32), 128, dtype=np.uint8))
        vmap = vesselness_at_scale(img, 1.5, FrangiConfig(scales=(1.5,)))
        assert np.abs(vmap.values).max() < 1e-9

    def test_range(self, rng):
        cfg = FrangiConfig(scales=(1.0, 2.0))
        for _ in range(3):
            vmap = frangi_multiscale(make_gray(rng, 40, 40), cfg)
            assert vmap.values.min() >= 0.0
            assert vmap.values.max() <= 1.0

    def test_dark_line_lights_up_centerline(self):
        img = np.full((48, 49), 255, dtype=np.uint8)
        img[:, 24] = 0  # one-pixel dark vertical line
        vmap = vesselness_at_scale(ImageBuffer(img), 1.0, FrangiConfig(scales=(1.0,)))
        centerline = vmap.values[8:-8, 24]
        background = vmap.values[8:-8, 4]
        assert centerline.mean() > 10 * max(background.mean(), 1e-12)
        assert centerline.min() > 0.1

    def test_bright_line_suppressed_in_dark_mode(self):
        img = np.zeros((48, 49), dtype=np.uint8)
        img[:, 24] = 255  # bright line, wrong polarity for dark vessels
        vmap = vesselness_at_scale(ImageBuffer(img), 1.0, FrangiConfig(scales=(1.0,)))
        assert np.abs(vmap.values[8:-8, 24]).max() < 1e-9

    def test_bright_line_found_when_dark_mode_off(self):
        img = np.zeros((48, 49), dtype=np.uint8)
        img[:, 24] = 255
        cfg = FrangiConfig(scales=(1.0,), dark_vessels=False)
        vmap = vesselness_at_scale(ImageBuffer(img), 1.0, cfg)
        assert vmap.values[24, 24] > 0.1


class TestMultiscale:
    def test_singleton_equals_single_scale(self, rng):
        img = make_gray(rng, 32, 32)
        cfg = FrangiConfig(scales=(2.0,))
        a = vesselness_at_scale(img, 2.0, cfg)
        b = frangi_multiscale(img, cfg)
        assert np.array_equal(a.values, b.values)

    def test_equals_pointwise_max_of_scales(self, rng):
        img = make_gray(rng, 32, 32)
        scales = (1.0, 2.0, 3.0)
        cfg = FrangiConfig(scales=scales)
        multi = frangi_multiscale(img, cfg)
        stack = np.stack([vesselness_at_scale(img, s, cfg).values for s in scales])
        assert np.array_equal(multi.values, stack.max(axis=0))

    def test_adding_scale_never_decreases(self, rng):
        img = make_gray(rng, 32, 32)
        a = frangi_multiscale(img, FrangiConfig(scales=(1.0, 2.0)))
        b = frangi_multiscale(img, FrangiConfig(scales=(1.0, 2.0, 3.0)))
        assert np.all(b.values >= a.values)

    def test_ridge_argmax_matches_profile_width(self):
        img = ridge_image(64, 129, sigma_profile=3.0)
        scales = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
        vmap = frangi_multiscale(img, FrangiConfig(scales=scales, c=0.1))
        winners = np.array(scales)[vmap.argmax_index[:, 64]]
        frac = np.isin(winners, (2.0, 3.0, 4.0)).mean()
        assert frac >= 0.95

    def test_to_u8_buffer(self):
        vmap = frangi_multiscale(
            ImageBuffer(np.full((16, 16), 50, dtype=np.uint8)), FrangiConfig(scales=(1.0,))
        )
        out = vmap.to_u8_buffer()
        assert out.depth == "u8"
        assert np.all(out.data == 0)
