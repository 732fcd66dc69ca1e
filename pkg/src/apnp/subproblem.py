"""Closed-form FFT solvers for the quadratic x-subproblems.

Four variants: {gradient-domain, image-domain} splitting x {deblur s=1,
super-resolution s>1}. All minimize

    || S K x - y ||^2  +  alpha * || T x - z ||^2

over x on the periodic grid, where K is circular blur, S is s-fold
decimation (S = identity for deblurring), and T is either the gradient
operator (gradient-domain splitting, z a 2-channel field) or the identity
(image-domain splitting, z an image).

For s = 1 every operator is diagonal in Fourier space and the minimizer is a
per-bin division. For s > 1 decimation folds groups of s^2 aliased
frequencies onto each low-resolution bin; within a group the normal operator
is rank-one plus diagonal,

    (1/s^2) * conj(k_b) k_b^T + alpha * diag(L_b),

with k_b the kernel transfer-function values at the aliases and L_b the
multiplier |lam_h|^2 + |lam_v|^2 (gradient splitting) or 1 (image
splitting). The fast path inverts each group with the Sherman-Morrison
formula; the group containing DC has one zero entry of L under the gradient
splitting and is solved densely instead (exactness over speed for one
block). A reference path solving every group densely is kept for
validation.
"""

from dataclasses import dataclass

import numpy as np

from .imgcore import as_image, psf2otf
from .operators import grad_multipliers

__all__ = [
    "IllPosedError",
    "SolverContext",
    "solve_grad_deblur",
    "solve_grad_sr",
    "solve_image_deblur",
    "solve_image_sr",
]


class IllPosedError(ValueError):
    """A subproblem has a (numerically) singular normal operator."""


@dataclass(frozen=True)
class SolverContext:
    """Precomputed Fourier diagonalization of the operators for one shape.

    Immutable and shareable across solves and threads.
    """

    otf: np.ndarray
    lam_h: np.ndarray
    lam_v: np.ndarray
    scale: int
    shape: tuple

    @classmethod
    def create(cls, kernel, shape, scale=1):
        h, w = shape
        if scale > 1 and (h % scale or w % scale):
            raise ValueError(f"shape {shape} not divisible by scale {scale}")
        otf = psf2otf(kernel, h, w)
        lam_h, lam_v = grad_multipliers(h, w)
        return cls(otf=otf, lam_h=lam_h, lam_v=lam_v, scale=scale, shape=(h, w))


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def _grad_rhs(ctx, z):
    """conj(lam_h) Zh + conj(lam_v) Zv, the Fourier image of D^T z."""
    zh = np.fft.fft2(z[0])
    zv = np.fft.fft2(z[1])
    return np.conj(ctx.lam_h) * zh + np.conj(ctx.lam_v) * zv


def _deblur_divide(ctx, y, rhs_reg, lam2, alpha):
    num = np.conj(ctx.otf) * np.fft.fft2(y) + alpha * rhs_reg
    den = np.abs(ctx.otf) ** 2 + alpha * lam2
    bad = np.abs(den) < 1e-12
    if np.any(bad):
        u, v = np.argwhere(bad)[0]
        raise IllPosedError(f"near-zero denominator at frequency bin ({u}, {v})")
    return np.real(np.fft.ifft2(num / den))


def solve_grad_deblur(ctx, y, z, alpha):
    """Minimize ||Kx - y||^2 + alpha ||Dx - z||^2 exactly (s = 1)."""
    _check_alpha(alpha)
    y = as_image(y)
    lam2 = np.abs(ctx.lam_h) ** 2 + np.abs(ctx.lam_v) ** 2
    return _deblur_divide(ctx, y, _grad_rhs(ctx, z), lam2, alpha)


def solve_image_deblur(ctx, y, z, alpha):
    """Minimize ||Kx - y||^2 + alpha ||x - z||^2 exactly (s = 1)."""
    _check_alpha(alpha)
    y = as_image(y)
    z = as_image(z)
    return _deblur_divide(ctx, y, np.fft.fft2(z), 1.0, alpha)


def _alias_split(F, s):
    """(H, W) spectrum -> (Hl, Wl, s*s) stacks of aliased coefficients."""
    h, w = F.shape
    hl, wl = h // s, w // s
    return (
        F.reshape(s, hl, s, wl).transpose(1, 3, 0, 2).reshape(hl, wl, s * s)
    )


def _alias_merge(blocks, s, shape):
    h, w = shape
    hl, wl = h // s, w // s
    return (
        blocks.reshape(hl, wl, s, s).transpose(2, 0, 3, 1).reshape(h, w)
    )


def _solve_sr(ctx, y, rhs_reg, lam2, alpha, method):
    """Shared block-aliasing solve for both SR splittings.

    rhs_reg is the Fourier image of T^T z; lam2 the diagonal multiplier of
    T^T T (array for gradient splitting, scalar 1.0 for image splitting).
    """
    s = ctx.scale
    h, w = ctx.shape
    yf = np.fft.fft2(as_image(y))
    if yf.shape != (h // s, w // s):
        raise ValueError(
            f"measurement shape {y.shape} does not match {(h // s, w // s)}"
        )
    k = _alias_split(ctx.otf, s)                       # (hl, wl, s^2)
    L = _alias_split(np.broadcast_to(lam2, (h, w)).astype(np.complex128), s)
    L = np.real(L)
    rhs = np.conj(k) * yf[:, :, None] + alpha * _alias_split(rhs_reg, s)

    if method == "reference":
        n = s * s
        M = (np.conj(k)[..., :, None] * k[..., None, :]) / (s * s)
        M = M + alpha * np.eye(n) * L[..., None, :]
        try:
            xb = np.linalg.solve(M, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as e:
            sign, logdet = np.linalg.slogdet(M)
            bad = np.argwhere(~np.isfinite(logdet) | (sign == 0))
            where = tuple(bad[0]) if len(bad) else "unknown"
            raise IllPosedError(f"singular aliasing block at {where}") from e
        if not np.all(np.isfinite(xb)):
            bad = np.argwhere(~np.isfinite(xb).all(axis=-1))
            raise IllPosedError(f"singular aliasing block at {tuple(bad[0])}")
    elif method == "fast":
        # Sherman-Morrison on alpha*diag(L) + u v^H with u = conj(k)/s^2,
        # v = conj(k). Eligible where all L entries are positive; under the
        # gradient splitting only the DC block fails that and is solved
        # densely below.
        Lsafe = np.where(L > 0, L, 1.0)
        Ainv_rhs = rhs / (alpha * Lsafe)
        Ainv_u = np.conj(k) / (s * s * alpha * Lsafe)
        vh_Ainv_rhs = np.sum(k * Ainv_rhs, axis=-1, keepdims=True)
        vh_Ainv_u = np.sum(k * Ainv_u, axis=-1, keepdims=True)
        xb = Ainv_rhs - Ainv_u * vh_Ainv_rhs / (1.0 + vh_Ainv_u)
        bad_blocks = np.argwhere(np.any(L <= 0, axis=-1))
        for (bi, bj) in bad_blocks:
            n = s * s
            kb = k[bi, bj]
            M = np.outer(np.conj(kb), kb) / (s * s) + alpha * np.diag(L[bi, bj])
            try:
                xb[bi, bj] = np.linalg.solve(M, rhs[bi, bj])
            except np.linalg.LinAlgError as e:
                raise IllPosedError(
                    f"singular aliasing block at ({bi}, {bj})"
                ) from e
    else:
        raise ValueError(f"unknown method {method!r}")

    X = _alias_merge(xb, s, (h, w))
    return np.real(np.fft.ifft2(X))


def solve_grad_sr(ctx, y, z, alpha, method="fast"):
    """Minimize ||SKx - y||^2 + alpha ||Dx - z||^2 exactly (s >= 2)."""
    _check_alpha(alpha)
    if ctx.scale < 2:
        raise ValueError("solve_grad_sr requires scale >= 2")
    lam2 = np.abs(ctx.lam_h) ** 2 + np.abs(ctx.lam_v) ** 2
    return _solve_sr(ctx, y, _grad_rhs(ctx, z), lam2, alpha, method)


def solve_image_sr(ctx, y, z, alpha, method="fast"):
    """Minimize ||SKx - y||^2 + alpha ||x - z||^2 exactly (s >= 2)."""
    _check_alpha(alpha)
    if ctx.scale < 2:
        raise ValueError("solve_image_sr requires scale >= 2")
    return _solve_sr(ctx, y, np.fft.fft2(as_image(z)), 1.0, alpha, method)
