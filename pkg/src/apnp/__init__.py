"""Plug-and-play image restoration with gradient-domain (analysis) priors."""

from .denoise import (
    IdentityDenoiser,
    NeuralDenoiser,
    SoftThresholdDenoiser,
    load_weights,
    save_weights,
)
from .estimator import PnPRestorer
from .metrics import psnr, ssim
from .operators import DegradationSpec, gaussian_kernel
from .pnp import (
    RunConfig,
    make_schedule,
    run_apnp_admm,
    run_apnp_hqs,
    run_pnp_admm,
    run_pnp_hqs,
)

__version__ = "0.1.0"

__all__ = [
    "DegradationSpec",
    "IdentityDenoiser",
    "NeuralDenoiser",
    "PnPRestorer",
    "RunConfig",
    "SoftThresholdDenoiser",
    "gaussian_kernel",
    "load_weights",
    "make_schedule",
    "psnr",
    "run_apnp_admm",
    "run_apnp_hqs",
    "run_pnp_admm",
    "run_pnp_hqs",
    "save_weights",
    "ssim",
]
