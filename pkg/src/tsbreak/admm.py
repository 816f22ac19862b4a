"""Scaled ADMM iteration for the group-fused-lasso segmentation problem.

The convex program is split into a global quadratic update (solved exactly
by row-wise Kalman smoothing, see :mod:`tsbreak.kalman`), a blockwise
group soft-threshold, and a scaled dual ascent step.  Iterations stop when
both the primal residual ||theta - w|| and the dual residual
rho * ||w - w_prev|| fall below standard absolute/relative thresholds.

The thresholded consensus variable ``w`` is the authoritative sparse
estimate: its blocks are exactly zero wherever the path is fused, which is
what break-point detection relies on.  The quadratic-update variable
``theta`` never lands on exact zeros and is kept for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    DiffPath,
    DimensionError,
    LaggedDesign,
    SolverConfig,
    TimeSeries,
    build_lagged_design,
)
from .kalman import CovarianceSchedule, covariance_schedule, smooth_rows

ProgressFn = Callable[[int, float, float], None]


@dataclass(frozen=True)
class AdmmState:
    """Snapshot of the three ADMM variables plus residuals at one iteration."""

    theta: DiffPath
    w: DiffPath
    omega: DiffPath
    iteration: int
    primal_residual: float
    dual_residual: float

    def __post_init__(self):
        if not (self.theta.blocks.shape == self.w.blocks.shape == self.omega.blocks.shape):
            raise DimensionError("theta, w, omega must be shape-identical")
        if not (
            np.isfinite(self.primal_residual)
            and np.isfinite(self.dual_residual)
            and self.primal_residual >= 0
            and self.dual_residual >= 0
        ):
            raise ValueError("residuals must be finite and nonnegative")


@dataclass(frozen=True)
class AdmmResult:
    """Solver output: sparse estimate, diagnostics, and residual traces."""

    w: DiffPath
    theta: DiffPath
    omega: DiffPath
    iterations: int
    converged: bool
    primal_residuals: np.ndarray
    dual_residuals: np.ndarray
    eps_primal: float
    eps_dual: float
    rho_final: float

    @property
    def final_state(self) -> AdmmState:
        return AdmmState(
            theta=self.theta,
            w=self.w,
            omega=self.omega,
            iteration=self.iterations,
            primal_residual=float(self.primal_residuals[-1]),
            dual_residual=float(self.dual_residuals[-1]),
        )


def group_soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    """Proximal map of kappa * ||.||_F: shrink toward zero, exactly zero inside.

    Returns 0 if ||v||_F < kappa, else (1 - kappa / ||v||_F) * v.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    v = np.asarray(v, dtype=np.float64)
    if kappa == 0.0:
        return v.copy()
    norm = float(np.sqrt(np.sum(v**2)))
    if norm < kappa:
        return np.zeros_like(v)
    return (1.0 - kappa / norm) * v


def _threshold_blocks(v: np.ndarray, kappa: float) -> np.ndarray:
    # Blockwise group soft threshold for t >= 2 (0-based index 1..); block 0
    # is the unpenalized base coefficient and passes through unchanged.
    out = v.copy()
    if kappa == 0.0:
        return out
    norms = np.sqrt(np.sum(v[1:] ** 2, axis=(1, 2)))
    scale = np.zeros_like(norms)
    np.divide(norms - kappa, norms, out=scale, where=norms >= kappa)
    scale[norms < kappa] = 0.0
    out[1:] = v[1:] * scale[:, None, None]
    return out


def _first_differences(states: np.ndarray) -> np.ndarray:
    out = np.empty_like(states)
    out[0] = states[0]
    out[1:] = states[1:] - states[:-1]
    return out


def _theta_update_blocks(
    design: LaggedDesign,
    w_blocks: np.ndarray,
    omega_blocks: np.ndarray,
    rho: float,
    schedule: CovarianceSchedule | None = None,
) -> np.ndarray:
    # bias per row j at step t is row j of (w - omega) at that step
    bias = w_blocks - omega_blocks
    states = smooth_rows(design.targets, design.regressors, bias, rho, schedule=schedule)
    return _first_differences(states)


def theta_update(
    design: LaggedDesign,
    w: DiffPath,
    omega: DiffPath,
    rho: float,
    schedule: CovarianceSchedule | None = None,
) -> DiffPath:
    """Exact minimizer of the quadratic ADMM subproblem, as a difference path.

    Decomposes into one smoothing problem per coefficient row with drift
    w - omega; rows share the covariance schedule, which is computed here
    when not supplied.
    """
    if w.blocks.shape != omega.blocks.shape:
        raise DimensionError("w and omega must be shape-identical")
    if w.blocks.shape[0] != design.n_steps or w.blocks.shape[2] != design.n_features:
        raise DimensionError(
            f"path blocks {w.blocks.shape} inconsistent with design "
            f"({design.n_steps} steps, {design.n_features} features)"
        )
    blocks = _theta_update_blocks(design, w.blocks, omega.blocks, rho, schedule)
    return DiffPath(blocks=blocks, lag=design.lag)


def w_update(theta: DiffPath, omega: DiffPath, lam: float, rho: float) -> DiffPath:
    """Group soft-threshold step: block 0 passes through, blocks t >= 2 shrink."""
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    blocks = _threshold_blocks(theta.blocks + omega.blocks, lam / rho)
    return DiffPath(blocks=blocks, lag=theta.lag)


def dual_update(omega: DiffPath, theta: DiffPath, w: DiffPath) -> DiffPath:
    """Scaled dual ascent: omega + theta - w, elementwise."""
    return DiffPath(blocks=omega.blocks + theta.blocks - w.blocks, lag=omega.lag)


def residuals(theta: DiffPath, w: DiffPath, w_prev: DiffPath, rho: float) -> tuple[float, float]:
    """Primal and dual residual norms over the full block stack."""
    primal = float(np.linalg.norm(theta.blocks - w.blocks))
    dual = float(rho * np.linalg.norm(w.blocks - w_prev.blocks))
    return primal, dual


def solve(
    series: TimeSeries,
    config: SolverConfig,
    progress: ProgressFn | None = None,
) -> AdmmResult:
    """Run the ADMM iteration to convergence or the iteration cap.

    Starts from all-zero variables (the problem is convex, so the solution
    does not depend on initialization) and reuses one covariance schedule
    for every iteration at a fixed rho.  ``progress`` is called once per
    iteration with (iteration, primal_residual, dual_residual).

    Never fails silently: hitting ``config.max_iter`` returns a result
    with ``converged=False``.
    """
    design = build_lagged_design(series, config.lag)
    T, p, d = design.n_steps, design.dim, design.n_features
    rho = config.rho

    schedule = covariance_schedule(design.regressors, rho)
    theta = np.zeros((T, p, d))
    w = np.zeros((T, p, d))
    omega = np.zeros((T, p, d))

    sqrt_n = np.sqrt(T * p * d)
    primal_trace: list[float] = []
    dual_trace: list[float] = []
    converged = False
    eps_primal = eps_dual = np.inf
    iteration = 0

    for iteration in range(1, config.max_iter + 1):
        theta = _theta_update_blocks(design, w, omega, rho, schedule)
        w_prev = w
        w = _threshold_blocks(theta + omega, config.lam / rho)
        omega = omega + theta - w

        primal = float(np.linalg.norm(theta - w))
        dual = float(rho * np.linalg.norm(w - w_prev))
        primal_trace.append(primal)
        dual_trace.append(dual)

        eps_primal = sqrt_n * config.eps_abs + config.eps_rel * max(
            np.linalg.norm(theta), np.linalg.norm(w)
        )
        eps_dual = sqrt_n * config.eps_abs + config.eps_rel * rho * np.linalg.norm(omega)

        if progress is not None:
            progress(iteration, primal, dual)

        if primal <= eps_primal and dual <= eps_dual:
            converged = True
            break

        if config.adaptive_rho:
            if primal > 10.0 * dual:
                rho *= 2.0
                omega = omega / 2.0
                schedule = covariance_schedule(design.regressors, rho)
            elif dual > 10.0 * primal:
                rho /= 2.0
                omega = omega * 2.0
                schedule = covariance_schedule(design.regressors, rho)

    lag = config.lag
    return AdmmResult(
        w=DiffPath(blocks=w, lag=lag),
        theta=DiffPath(blocks=theta, lag=lag),
        omega=DiffPath(blocks=omega, lag=lag),
        iterations=iteration,
        converged=converged,
        primal_residuals=np.asarray(primal_trace),
        dual_residuals=np.asarray(dual_trace),
        eps_primal=float(eps_primal),
        eps_dual=float(eps_dual),
        rho_final=rho,
    )
