"""Independent reference solvers used by tests and acceptance runs.

Everything here works on the dense cumulative design matrix and is
deliberately simple and slow; none of it shares numerical code with the
Kalman or ADMM implementations it is used to check.  Size guards keep the
dense solves honest about their intended scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DiffPath, LaggedDesign


def cumulative_design(design: LaggedDesign) -> np.ndarray:
    """Dense (T, T*d) lower-triangular design: row t repeats its lag vector
    in every column block s <= t, so that X @ stack(diffs) reproduces the
    per-step predictions of the cumulative coefficient path."""
    T, d = design.n_steps, design.n_features
    X = np.zeros((T, T * d))
    for t in range(T):
        X[t, : (t + 1) * d] = np.tile(design.regressors[t], t + 1)
    return X


def stack_blocks(blocks: np.ndarray) -> np.ndarray:
    """(T, p, d) difference blocks -> (T*d, p) stacked matrix."""
    T, p, d = blocks.shape
    return blocks.transpose(0, 2, 1).reshape(T * d, p)


def unstack_blocks(stacked: np.ndarray, n_steps: int) -> np.ndarray:
    """(T*d, p) stacked matrix -> (T, p, d) difference blocks."""
    p = stacked.shape[1]
    d = stacked.shape[0] // n_steps
    return stacked.reshape(n_steps, d, p).transpose(0, 2, 1)


def reparam_objective(theta: DiffPath, design: LaggedDesign, lam: float) -> float:
    """Objective of the difference-parameterized problem, evaluated densely."""
    X = cumulative_design(design)
    resid = design.targets - X @ stack_blocks(theta.blocks)
    penalty = float(np.sum(np.sqrt(np.sum(theta.blocks[1:] ** 2, axis=(1, 2)))))
    return float(np.sum(resid**2)) + lam * penalty


def _guard_size(design: LaggedDesign, limit: int = 5000) -> None:
    total = design.n_steps * design.dim * design.n_features
    if total > limit:
        raise ValueError(f"dense oracle guard: T*p*d = {total} exceeds {limit}")


def dense_global_solve(
    design: LaggedDesign, w: DiffPath, omega: DiffPath, rho: float
) -> DiffPath:
    """Solve the quadratic ADMM subproblem by explicit normal equations."""
    _guard_size(design)
    T, d = design.n_steps, design.n_features
    X = cumulative_design(design)
    V = stack_blocks(w.blocks - omega.blocks)
    H = 2.0 * X.T @ X + rho * np.eye(T * d)
    rhs = 2.0 * X.T @ design.targets + rho * V
    theta = np.linalg.solve(H, rhs)
    return DiffPath(blocks=unstack_blocks(theta, T), lag=design.lag)


def dense_least_squares(design: LaggedDesign) -> DiffPath:
    """Unpenalized least-squares path via normal equations.

    A 1e-10 ridge stabilizes the factorization when the cumulative design
    is rank-deficient; the returned objective is unaffected at the
    comparison tolerances used in tests.
    """
    _guard_size(design)
    T, d = design.n_steps, design.n_features
    X = cumulative_design(design)
    H = 2.0 * X.T @ X + 1e-10 * np.eye(T * d)
    theta = np.linalg.solve(H, 2.0 * X.T @ design.targets)
    return DiffPath(blocks=unstack_blocks(theta, T), lag=design.lag)


@dataclass(frozen=True)
class ProxGradResult:
    theta: DiffPath
    objective: float
    iterations: int
    converged: bool


def proximal_gradient_reference(
    design: LaggedDesign, lam: float, tol: float = 1e-12, max_iter: int = 100000
) -> ProxGradResult:
    """Accelerated proximal gradient (with restarts) on the fused problem.

    Step size is the reciprocal of the gradient Lipschitz constant
    2 * lambda_max(X^T X), computed densely.  Stops when the relative
    objective change drops below ``tol``; hitting ``max_iter`` first is
    reported via ``converged=False``.
    """
    _guard_size(design)
    T, p, d = design.n_steps, design.dim, design.n_features
    X = cumulative_design(design)
    Y = design.targets
    gram = X.T @ X
    lipschitz = 2.0 * float(np.linalg.eigvalsh(gram).max())
    step = 1.0 / lipschitz

    def objective(stacked: np.ndarray) -> float:
        resid = Y - X @ stacked
        norms = np.sqrt(np.sum(unstack_blocks(stacked, T)[1:] ** 2, axis=(1, 2)))
        return float(np.sum(resid**2)) + lam * float(np.sum(norms))

    def prox(stacked: np.ndarray) -> np.ndarray:
        blocks = unstack_blocks(stacked, T)
        out = blocks.copy()
        thr = lam * step
        if thr > 0:
            norms = np.sqrt(np.sum(blocks[1:] ** 2, axis=(1, 2)))
            scale = np.zeros_like(norms)
            np.divide(norms - thr, norms, out=scale, where=norms >= thr)
            scale[norms < thr] = 0.0
            out[1:] = blocks[1:] * scale[:, None, None]
        return stack_blocks(out)

    theta = np.zeros((T * d, p))
    momentum = theta.copy()
    t_k = 1.0
    prev_obj = objective(theta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = 2.0 * (gram @ momentum - X.T @ Y)
        theta_new = prox(momentum - step * grad)
        obj = objective(theta_new)
        if obj > prev_obj:
            # restart momentum; re-do the step from the last accepted point
            momentum = theta.copy()
            t_k = 1.0
            grad = 2.0 * (gram @ momentum - X.T @ Y)
            theta_new = prox(momentum - step * grad)
            obj = objective(theta_new)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        momentum = theta_new + ((t_k - 1.0) / t_next) * (theta_new - theta)
        theta, t_k = theta_new, t_next
        if abs(prev_obj - obj) <= tol * (1.0 + abs(obj)):
            converged = True
            prev_obj = obj
            break
        prev_obj = obj

    return ProxGradResult(
        theta=DiffPath(blocks=unstack_blocks(theta, T), lag=design.lag),
        objective=prev_obj,
        iterations=iterations,
        converged=converged,
    )
