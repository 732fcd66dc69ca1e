"""Reference image quality metrics: PSNR and SSIM.

Both operate on [0,1]-valued single-channel images with dynamic range 1.
SSIM uses the canonical construction: 11x11 Gaussian window (sigma 1.5),
K1 = 0.01, K2 = 0.03, mean over the valid (fully-windowed) region.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .imgcore import as_image

__all__ = ["MetricReport", "psnr", "ssim", "evaluate"]

PSNR_CAP_DB = 100.0


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    crop_border: int


def _crop(a, border):
    if border == 0:
        return a
    return a[border:-border, border:-border]


def psnr(a, b, crop=0):
    """10 log10(1 / MSE) over the mutually cropped region, in dB.

    Identical images return the documented cap of 100 dB.
    """
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if crop < 0 or 2 * crop >= min(a.shape):
        raise ValueError(f"invalid crop {crop} for shape {a.shape}")
    mse = np.mean((_crop(a, crop) - _crop(b, crop)) ** 2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size=11, sigma=1.5):
    c = (size - 1) / 2
    g = np.exp(-((np.arange(size) - c) ** 2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b):
    """Mean local SSIM with the canonical Gaussian window and constants."""
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < 11:
        raise ValueError(f"image too small for 11x11 SSIM window: {a.shape}")
    w = _gaussian_window()
    c1 = 0.01**2
    c2 = 0.03**2

    def filt(x):
        return fftconvolve(x, w, mode="valid")

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def evaluate(x, x_true, crop_border=0):
    """PSNR/SSIM report with the given border crop applied to both metrics."""
    return MetricReport(
        psnr=psnr(x, x_true, crop_border),
        ssim=ssim(_crop(as_image(x), crop_border), _crop(as_image(x_true), crop_border)),
        crop_border=crop_border,
    )
