"""Dense 2-D array primitives: FFTs, OTFs, circular convolution, seeded noise.

Images are plain 2-D float64 numpy arrays (row-major, nominal range [0,1]).
Spectra are 2-D complex128 arrays of the same shape. Blur kernels are small
odd-sized 2-D float64 arrays normalized to unit sum.

All convolution in this package is periodic (circular). That choice makes
every linear operator appearing in the quadratic subproblems diagonal, or
block-diagonal, in Fourier space, so the closed-form solvers are exact.
"""

import numpy as np
from scipy import ndimage

__all__ = [
    "as_image",
    "validate_kernel",
    "fft2",
    "ifft2",
    "psf2otf",
    "circ_conv",
    "circ_corr",
    "awgn",
]


def as_image(x):
    """Coerce to a 2-D float64 array and check finiteness."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains NaN or Inf")
    return x


def validate_kernel(k):
    """Check a blur kernel: square, odd size, normalized to unit sum."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square 2-D, got shape {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k.shape[0]}")
    s = k.sum()
    if abs(s - 1.0) > 1e-8:
        raise ValueError(f"kernel taps must sum to 1, got {s!r}")
    return k


def fft2(img):
    """Unnormalized forward 2-D DFT."""
    return np.fft.fft2(np.asarray(img))


def ifft2(spec):
    """Inverse 2-D DFT (applies the 1/(HW) factor); returns the real part."""
    return np.real(np.fft.ifft2(spec))


def psf2otf(k, h, w):
    """Transfer function of a blur kernel on an h-by-w periodic grid.

    The kernel is zero-padded to (h, w) with its center tap, index
    (size-1)//2 per axis, circularly shifted to index (0, 0). The DC bin of
    the result equals the tap sum (1 for a normalized kernel).
    """
    k = validate_kernel(k)
    size = k.shape[0]
    if size > min(h, w):
        raise ValueError(f"kernel size {size} exceeds image size ({h}, {w})")
    pad = np.zeros((h, w))
    pad[:size, :size] = k
    c = (size - 1) // 2
    pad = np.roll(pad, (-c, -c), axis=(0, 1))
    return np.fft.fft2(pad)


def circ_conv(img, k):
    """Circular (periodic) 2-D convolution with a normalized kernel.

    Computed in the spatial domain; equals ifft2(psf2otf(k) * fft2(img))
    up to rounding. Preserves the image mean.
    """
    img = as_image(img)
    k = validate_kernel(k)
    if k.shape[0] > min(img.shape):
        raise ValueError(
            f"kernel size {k.shape[0]} exceeds image size {img.shape}"
        )
    return ndimage.convolve(img, k, mode="wrap")


def circ_corr(img, k):
    """Circular 2-D correlation; the adjoint of circ_conv with the same kernel."""
    img = as_image(img)
    k = validate_kernel(k)
    if k.shape[0] > min(img.shape):
        raise ValueError(
            f"kernel size {k.shape[0]} exceeds image size {img.shape}"
        )
    return ndimage.correlate(img, k, mode="wrap")


def awgn(shape, sigma, seed):
    """I.i.d. zero-mean Gaussian field with standard deviation sigma.

    Deterministic given the seed. PRNG: numpy PCG64, which is seeded,
    portable, and stable across platforms.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return sigma * rng.standard_normal(shape)
