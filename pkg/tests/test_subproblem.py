import numpy as np
import pytest

from apnp.operators import grad
from apnp.subproblem import (
    SolverContext,
    solve_grad_deblur,
    solve_grad_sr,
    solve_image_deblur,
    solve_image_sr,
)

from oracles import dense_forward, dense_grad_matrices, dense_subproblem_solve

rng = np.random.default_rng(23)

IDENTITY = np.array([[1.0]])


def random_kernel(size, seed):
    k = np.random.default_rng(seed).random((size, size))
    return k / k.sum()


def dense_solve_grad(kernel, y, z, alpha, h, w, s):
    A = dense_forward(kernel, h, w, s)
    Dh, Dv = dense_grad_matrices(h, w)
    T = np.vstack([Dh, Dv])
    zv = np.concatenate([z[0].ravel(), z[1].ravel()])
    return dense_subproblem_solve(A, T, y.ravel(), zv, alpha).reshape(h, w)


def dense_solve_image(kernel, y, z, alpha, h, w, s):
    A = dense_forward(kernel, h, w, s)
    T = np.eye(h * w)
    return dense_subproblem_solve(A, T, y.ravel(), z.ravel(), alpha).reshape(h, w)


def grad_objective(kernel, y, z, alpha, x, s):
    h, w = x.shape
    A = dense_forward(kernel, h, w, s)
    Dh, Dv = dense_grad_matrices(h, w)
    r = A @ x.ravel() - y.ravel()
    rh = Dh @ x.ravel() - z[0].ravel()
    rv = Dv @ x.ravel() - z[1].ravel()
    return r @ r + alpha * (rh @ rh + rv @ rv)


class TestGradDeblur:
    def test_identity_kernel_consistent_target(self):
        y = rng.random((8, 8))
        ctx = SolverContext.create(IDENTITY, (8, 8), 1)
        x = solve_grad_deblur(ctx, y, grad(y), alpha=0.7)
        assert np.max(np.abs(x - y)) < 1e-10

    def test_dense_oracle(self):
        k = random_kernel(5, 2)
        y = rng.random((12, 12))
        z = rng.standard_normal((2, 12, 12))
        ctx = SolverContext.create(k, (12, 12), 1)
        x = solve_grad_deblur(ctx, y, z, alpha=0.3)
        ref = dense_solve_grad(k, y, z, 0.3, 12, 12, 1)
        assert np.max(np.abs(x - ref)) < 1e-6 * max(1.0, np.max(np.abs(ref)))

    def test_alpha_validation(self):
        ctx = SolverContext.create(IDENTITY, (8, 8), 1)
        with pytest.raises(ValueError):
            solve_grad_deblur(ctx, rng.random((8, 8)), np.zeros((2, 8, 8)), 0.0)


class TestGradSR:
    def test_consistent_data_large_alpha(self):
        xstar = np.random.default_rng(3).random((8, 8))
        k = IDENTITY
        ctx = SolverContext.create(k, (8, 8), 2)
        y = xstar[::2, ::2]
        x = solve_grad_sr(ctx, y, grad(xstar), alpha=1e8)
        assert np.max(np.abs(x - xstar)) < 1e-4

    @pytest.mark.parametrize("s", [2, 3])
    def test_normal_equation_residual(self, s):
        k = random_kernel(3, 30 + s)
        h = w = 12
        y = rng.random((h // s, w // s))
        z = rng.standard_normal((2, h, w))
        ctx = SolverContext.create(k, (h, w), s)
        x = solve_grad_sr(ctx, y, z, alpha=0.4)
        A = dense_forward(k, h, w, s)
        Dh, Dv = dense_grad_matrices(h, w)
        lhs = (A.T @ A + 0.4 * (Dh.T @ Dh + Dv.T @ Dv)) @ x.ravel()
        rhs = A.T @ y.ravel() + 0.4 * (Dh.T @ z[0].ravel() + Dv.T @ z[1].ravel())
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-8

    def test_dense_oracle(self):
        k = random_kernel(3, 8)
        y = rng.random((4, 4))
        z = rng.standard_normal((2, 8, 8))
        ctx = SolverContext.create(k, (8, 8), 2)
        x = solve_grad_sr(ctx, y, z, alpha=0.25)
        ref = dense_solve_grad(k, y, z, 0.25, 8, 8, 2)
        assert np.max(np.abs(x - ref)) < 1e-6 * max(1.0, np.max(np.abs(ref)))

    @pytest.mark.parametrize("s", [2, 3])
    def test_fast_matches_reference(self, s):
        k = random_kernel(5, 40 + s)
        h = w = 12
        y = rng.random((h // s, w // s))
        z = rng.standard_normal((2, h, w))
        ctx = SolverContext.create(k, (h, w), s)
        xf = solve_grad_sr(ctx, y, z, alpha=0.15, method="fast")
        xr = solve_grad_sr(ctx, y, z, alpha=0.15, method="reference")
        assert np.max(np.abs(xf - xr)) < 1e-8 * max(1.0, np.max(np.abs(xr)))


class TestImageDeblur:
    def test_identity_kernel_scalar_case(self):
        y, z = rng.random((8, 8)), rng.random((8, 8))
        ctx = SolverContext.create(IDENTITY, (8, 8), 1)
        x = solve_image_deblur(ctx, y, z, alpha=0.6)
        assert np.max(np.abs(x - (y + 0.6 * z) / 1.6)) < 1e-12

    def test_large_alpha_approaches_target(self):
        k = random_kernel(3, 4)
        y, z = rng.random((8, 8)), rng.random((8, 8))
        ctx = SolverContext.create(k, (8, 8), 1)
        x = solve_image_deblur(ctx, y, z, alpha=1e8)
        assert np.max(np.abs(x - z)) < 1e-6

    def test_dense_oracle(self):
        k = random_kernel(5, 5)
        y, z = rng.random((12, 12)), rng.random((12, 12))
        ctx = SolverContext.create(k, (12, 12), 1)
        x = solve_image_deblur(ctx, y, z, alpha=0.3)
        ref = dense_solve_image(k, y, z, 0.3, 12, 12, 1)
        assert np.max(np.abs(x - ref)) < 1e-6


class TestImageSR:
    def test_hand_solved_2x2_block(self):
        # 2x2 high-res, 1x1 low-res, identity kernel, z = 0, alpha = 1:
        # minimize (x00 - y)^2 + ||x||^2 -> x00 = y/2, others 0.
        y = np.array([[0.8]])
        ctx = SolverContext.create(IDENTITY, (2, 2), 2)
        x = solve_image_sr(ctx, y, np.zeros((2, 2)), alpha=1.0)
        assert np.max(np.abs(x - np.array([[0.4, 0.0], [0.0, 0.0]]))) < 1e-12

    @pytest.mark.parametrize("s", [2, 3])
    def test_normal_equation_residual(self, s):
        k = random_kernel(3, 80 + s)
        h = w = 12
        y = rng.random((h // s, w // s))
        z = rng.random((h, w))
        ctx = SolverContext.create(k, (h, w), s)
        x = solve_image_sr(ctx, y, z, alpha=0.5)
        A = dense_forward(k, h, w, s)
        lhs = (A.T @ A + 0.5 * np.eye(h * w)) @ x.ravel()
        rhs = A.T @ y.ravel() + 0.5 * z.ravel()
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-8

    def test_dense_oracle(self):
        k = random_kernel(3, 9)
        y, z = rng.random((4, 4)), rng.random((8, 8))
        ctx = SolverContext.create(k, (8, 8), 2)
        x = solve_image_sr(ctx, y, z, alpha=0.35)
        ref = dense_solve_image(k, y, z, 0.35, 8, 8, 2)
        assert np.max(np.abs(x - ref)) < 1e-6


class TestOptimality:
    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_perturbation_never_decreases_objective(self, s):
        k = random_kernel(3, 90 + s)
        h = w = 12
        y = rng.random((h // s, w // s))
        z = rng.standard_normal((2, h, w))
        ctx = SolverContext.create(k, (h, w), s)
        alpha = 0.3
        if s == 1:
            x = solve_grad_deblur(ctx, y, z, alpha)
        else:
            x = solve_grad_sr(ctx, y, z, alpha)
        j0 = grad_objective(k, y, z, alpha, x, s)
        for trial in range(10):
            d = np.random.default_rng(trial).standard_normal((h, w))
            d *= 1e-3 / np.linalg.norm(d)
            assert grad_objective(k, y, z, alpha, x + d, s) >= j0 - 1e-12
