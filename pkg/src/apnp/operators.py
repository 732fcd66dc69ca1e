"""Linear operators: image gradient D and its adjoint, measurement operators
A (blur, blur + downsample) and their adjoints, and Gaussian blur kernels.

Gradient fields are arrays of shape (2, H, W): channel 0 holds horizontal
forward differences, channel 1 vertical, both with periodic wrap. Forward
differences with wrap keep both channels the same size as the image and make
each channel sum to zero exactly (telescoping).

Decimation keeps samples at indices congruent to 0 (mod s) on both axes;
forward_adjoint zero-fills the discarded positions. These conventions must
stay consistent with the Fourier multipliers in the subproblem module.
"""

from dataclasses import dataclass, field

import numpy as np

from .imgcore import as_image, awgn, circ_conv, circ_corr, validate_kernel

__all__ = [
    "DegradationSpec",
    "grad",
    "grad_adjoint",
    "grad_multipliers",
    "downsample",
    "upsample_zero",
    "forward_apply",
    "forward_adjoint",
    "gaussian_kernel",
]


@dataclass(frozen=True)
class DegradationSpec:
    """Forward model y = (x (*) k) downsampled by s, plus noise of std sigma.

    scale 1 means pure deblurring; scales 2..4 are super-resolution factors.
    sigma is in [0,1] intensity units.
    """

    kernel: np.ndarray
    scale: int = 1
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kernel", validate_kernel(self.kernel))
        if self.scale not in (1, 2, 3, 4):
            raise ValueError(f"scale must be in {{1,2,3,4}}, got {self.scale}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must be in [0,1], got {self.sigma}")

    def noiseless(self):
        return DegradationSpec(self.kernel, self.scale, 0.0)


def grad(x):
    """Periodic forward-difference gradient; returns shape (2, H, W).

    dh[i,j] = x[i,(j+1) mod W] - x[i,j];  dv[i,j] = x[(i+1) mod H, j] - x[i,j].
    """
    x = as_image(x)
    dh = np.roll(x, -1, axis=1) - x
    dv = np.roll(x, -1, axis=0) - x
    return np.stack([dh, dv])


def grad_adjoint(g):
    """Exact adjoint of grad: <grad(x), g> = <x, grad_adjoint(g)>."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 3 or g.shape[0] != 2:
        raise ValueError(f"expected gradient field of shape (2,H,W), got {g.shape}")
    dh, dv = g[0], g[1]
    return (np.roll(dh, 1, axis=1) - dh) + (np.roll(dv, 1, axis=0) - dv)


def grad_multipliers(h, w):
    """Fourier multipliers (lam_h, lam_v) of the two difference operators.

    grad(x) channel c has DFT lam_c * fft2(x). Both vanish jointly only at
    the DC bin.
    """
    wy = np.exp(2j * np.pi * np.arange(h) / h) - 1.0
    wx = np.exp(2j * np.pi * np.arange(w) / w) - 1.0
    lam_h = np.broadcast_to(wx[None, :], (h, w)).copy()
    lam_v = np.broadcast_to(wy[:, None], (h, w)).copy()
    return lam_h, lam_v


def downsample(x, s):
    """Keep pixels at indices = 0 (mod s) on both axes."""
    x = as_image(x)
    if x.shape[0] % s or x.shape[1] % s:
        raise ValueError(f"image shape {x.shape} not divisible by scale {s}")
    return x[::s, ::s]


def upsample_zero(y, s):
    """Zero-fill upsampling by s; the adjoint of downsample."""
    y = as_image(y)
    out = np.zeros((y.shape[0] * s, y.shape[1] * s))
    out[::s, ::s] = y
    return out


def forward_apply(spec, x, seed=0):
    """Apply the degradation: circular blur, s-fold decimation, AWGN."""
    x = as_image(x)
    y = circ_conv(x, spec.kernel)
    if spec.scale > 1:
        y = downsample(y, spec.scale)
    if spec.sigma > 0:
        y = y + awgn(y.shape, spec.sigma, seed)
    return y


def forward_adjoint(spec, y):
    """Adjoint of the noiseless forward model: zero-fill then correlate."""
    y = as_image(y)
    if spec.scale > 1:
        y = upsample_zero(y, spec.scale)
    return circ_corr(y, spec.kernel)


def gaussian_kernel(sigma_x, sigma_y, theta=0.0, size=25):
    """Normalized bivariate Gaussian blur kernel.

    The covariance has principal standard deviations (sigma_x, sigma_y)
    rotated by theta radians; the density is sampled at integer offsets from
    the center tap, truncated to size-by-size, and normalized to unit sum.
    """
    if size % 2 == 0 or size < 1:
        raise ValueError(f"size must be odd and positive, got {size}")
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError("sigma_x and sigma_y must be positive")
    c = (size - 1) // 2
    j, i = np.meshgrid(np.arange(size) - c, np.arange(size) - c)
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    cov = rot @ np.diag([sigma_x**2, sigma_y**2]) @ rot.T
    icov = np.linalg.inv(cov)
    # quadratic form at offsets (x, y) = (j, i)
    q = icov[0, 0] * j**2 + 2 * icov[0, 1] * j * i + icov[1, 1] * i**2
    k = np.exp(-0.5 * q)
    return k / k.sum()


# Default 8-kernel benchmark set: 4 isotropic, 4 anisotropic, size 25.
DEFAULT_KERNEL_PARAMS = (
    (0.7, 0.7, 0.0, 25),
    (1.2, 1.2, 0.0, 25),
    (1.6, 1.6, 0.0, 25),
    (2.0, 2.0, 0.0, 25),
    (4.0, 1.0, 0.0, 25),
    (4.0, 1.0, np.pi / 4, 25),
    (3.0, 1.5, np.pi / 2, 25),
    (5.0, 2.0, 3 * np.pi / 4, 25),
)


def default_kernels(size=None):
    """The built-in benchmark kernel set as a list of (params, kernel)."""
    out = []
    for sx, sy, th, sz in DEFAULT_KERNEL_PARAMS:
        sz = size if size is not None else sz
        out.append(((sx, sy, th, sz), gaussian_kernel(sx, sy, th, sz)))
    return out
