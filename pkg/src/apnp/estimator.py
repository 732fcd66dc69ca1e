"""Scikit-learn style front door for the reconstruction drivers.

PnPRestorer wraps the four plug-and-play algorithms behind the familiar
fit/transform surface so restoration composes with sklearn pipelines and
parameter search. `fit` validates parameters and freezes the degradation
model; `transform` restores one image or a stack of images.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .denoise import parse_denoiser
from .operators import DegradationSpec
from .pnp import (
    ALGORITHMS,
    LAMBDA_DEFAULTS,
    SCHEDULE_SCALE_DEFAULTS,
    SIGMA_FLOOR_DEFAULT,
    SIGMA_MAX_DEFAULT,
    RunConfig,
    run_algorithm,
)

__all__ = ["PnPRestorer"]


class PnPRestorer(BaseEstimator, TransformerMixin):
    """Plug-and-play restorer with a fit/transform interface.

    Parameters
    ----------
    kernel : 2-D array, odd-sized normalized blur kernel (default identity).
    scale : decimation factor of the forward model (1 = deblurring).
    noise_sigma : measurement noise standard deviation in [0,1] units.
    algorithm : one of "apnp_hqs", "apnp_admm", "pnp_hqs", "pnp_admm".
    denoiser : denoiser handle, or a string spec "identity" | "soft:W" |
        "neural:PATH" resolved against the algorithm's domain.
    lam, iters, schedule_scale, sigma_floor, sigma_max, seed : driver knobs;
        lam and schedule_scale default per algorithm when None.
    """

    def __init__(self, kernel=None, scale=1, noise_sigma=0.0,
                 algorithm="apnp_hqs", denoiser="soft:1.0", lam=None,
                 iters=24, schedule_scale=None,
                 sigma_floor=SIGMA_FLOOR_DEFAULT, sigma_max=SIGMA_MAX_DEFAULT,
                 seed=0):
        self.kernel = kernel
        self.scale = scale
        self.noise_sigma = noise_sigma
        self.algorithm = algorithm
        self.denoiser = denoiser
        self.lam = lam
        self.iters = iters
        self.schedule_scale = schedule_scale
        self.sigma_floor = sigma_floor
        self.sigma_max = sigma_max
        self.seed = seed

    def _resolve(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        domain = ALGORITHMS[self.algorithm][1]
        kernel = np.array([[1.0]]) if self.kernel is None else self.kernel
        spec = DegradationSpec(kernel, self.scale, self.noise_sigma)
        if isinstance(self.denoiser, str):
            denoiser = parse_denoiser(self.denoiser, domain)
        else:
            denoiser = self.denoiser
            if denoiser.domain != domain:
                raise ValueError(
                    f"{self.algorithm} needs a {domain}-domain denoiser, "
                    f"got {denoiser.domain}"
                )
        lam = LAMBDA_DEFAULTS[self.algorithm] if self.lam is None else self.lam
        scale = (
            SCHEDULE_SCALE_DEFAULTS[self.algorithm]
            if self.schedule_scale is None
            else self.schedule_scale
        )
        cfg = RunConfig(
            lam=lam, iters=self.iters, sigma_floor=self.sigma_floor,
            schedule_scale=scale, sigma_max=self.sigma_max, seed=self.seed,
        )
        return cfg, spec, denoiser

    def fit(self, X=None, y=None):
        """Validate parameters and freeze the degradation model."""
        cfg, spec, denoiser = self._resolve()
        self.cfg_ = cfg
        self.spec_ = spec
        self.denoiser_ = denoiser
        return self

    def transform(self, X):
        """Restore a single measurement (2-D) or a stack (3-D).

        Returns high-resolution images clipped to [0, 1]; the trace of the
        most recent restoration is kept in `trace_`.
        """
        if not hasattr(self, "spec_"):
            self.fit()
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 2
        stack = X[None] if single else X
        out = []
        for img in stack:
            x, trace = run_algorithm(
                self.algorithm, self.cfg_, self.spec_, img, self.denoiser_
            )
            out.append(x)
        self.trace_ = trace
        out = np.stack(out)
        return out[0] if single else out

    def predict(self, X):
        """Alias of transform."""
        return self.transform(X)
