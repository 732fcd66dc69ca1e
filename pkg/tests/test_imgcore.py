import numpy as np
import pytest

from apnp.imgcore import awgn, circ_conv, circ_corr, fft2, ifft2, psf2otf

from oracles import dense_circulant

rng = np.random.default_rng(7)


def random_kernel(size, seed):
    k = np.random.default_rng(seed).random((size, size))
    return k / k.sum()


class TestFFT:
    def test_constant_image_dc_only(self):
        spec = fft2(np.full((6, 9), 0.3))
        assert abs(spec[0, 0] - 0.3 * 54) < 1e-10
        spec[0, 0] = 0
        assert np.max(np.abs(spec)) < 1e-10

    def test_roundtrip(self):
        x = rng.random((16, 16))
        assert np.max(np.abs(ifft2(fft2(x)) - x)) < 1e-10 * np.max(np.abs(x))

    def test_impulse(self):
        x = np.zeros((8, 8))
        x[0, 0] = 1.0
        assert np.allclose(fft2(x), np.ones((8, 8)), atol=1e-12)

    def test_parseval(self):
        for n in (5, 16, 33, 64):
            x = rng.random((n, n))
            lhs = np.sum(np.abs(fft2(x)) ** 2)
            rhs = n * n * np.sum(x**2)
            assert abs(lhs - rhs) <= 1e-8 * rhs


class TestPsf2Otf:
    def test_identity_kernel(self):
        otf = psf2otf(np.array([[1.0]]), 8, 12)
        assert np.allclose(otf, np.ones((8, 12)), atol=1e-12)

    def test_box_kernel_dc(self):
        otf = psf2otf(np.full((3, 3), 1 / 9), 8, 8)
        assert abs(otf[0, 0] - 1.0) < 1e-12

    def test_too_large_kernel(self):
        with pytest.raises(ValueError):
            psf2otf(random_kernel(5, 0), 4, 16)

    @pytest.mark.parametrize("seed", range(5))
    def test_consistency_with_spatial_convolution(self, seed):
        k = random_kernel(5, seed)
        x = np.random.default_rng(100 + seed).random((16, 16))
        via_fft = ifft2(psf2otf(k, 16, 16) * fft2(x))
        assert np.max(np.abs(via_fft - circ_conv(x, k))) < 1e-8


class TestCircConv:
    def test_identity(self):
        x = rng.random((9, 7))
        assert np.allclose(circ_conv(x, np.array([[1.0]])), x, atol=1e-14)

    def test_constant_preserved(self):
        k = random_kernel(3, 3)
        out = circ_conv(np.full((8, 8), 0.42), k)
        assert np.allclose(out, 0.42, atol=1e-12)

    def test_matches_dense_circulant(self):
        k = random_kernel(3, 11)
        x = np.random.default_rng(5).random((12, 12))
        A = dense_circulant(k, 12, 12)
        assert np.max(np.abs(circ_conv(x, k).ravel() - A @ x.ravel())) < 1e-8

    def test_linearity(self):
        k = random_kernel(5, 9)
        x1, x2 = rng.random((12, 12)), rng.random((12, 12))
        lhs = circ_conv(2.5 * x1 - 0.7 * x2, k)
        rhs = 2.5 * circ_conv(x1, k) - 0.7 * circ_conv(x2, k)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_corr_is_adjoint(self):
        k = random_kernel(5, 21)
        x, y = rng.random((10, 10)), rng.random((10, 10))
        lhs = np.sum(circ_conv(x, k) * y)
        rhs = np.sum(x * circ_corr(y, k))
        assert abs(lhs - rhs) < 1e-10 * abs(lhs)


class TestAwgn:
    def test_zero_sigma(self):
        assert np.all(awgn((5, 5), 0.0, 3) == 0.0)

    def test_deterministic(self):
        a = awgn((32, 32), 0.1, 42)
        b = awgn((32, 32), 0.1, 42)
        assert np.array_equal(a, b)

    def test_sample_std(self):
        n = awgn((512, 512), 25 / 255, 0)
        assert abs(n.std() - 25 / 255) < 0.02 * 25 / 255

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            awgn((4, 4), -0.1, 0)
