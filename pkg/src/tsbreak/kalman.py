"""Row-wise quadratic smoothing via forward filtering and backward smoothing.

The global step of the ADMM solver decomposes into one strictly convex
quadratic per coefficient row:

    minimize over a_1..a_T:
        sum_t (y_t - x_t . a_t)^2  +  (rho/2) sum_t ||a_t - a_{t-1} - mu_t||^2

with a_0 = 0.  This is the negative log-likelihood of a linear-Gaussian
state-space model (random-walk state with drift mu_t and noise covariance
(1/rho) I; scalar observation y_t = x_t . a_t with noise variance 1/2), so
its exact minimizer is the Rauch-Tung-Striebel smoothed mean, computed in
time linear in T.

The covariance side of the recursion depends only on (x_t, rho), not on
targets or drift, so one :class:`CovarianceSchedule` is shared by all p
row problems of an ADMM iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DimensionError


class SmootherError(RuntimeError):
    """Numerical failure inside the smoothing recursion (bug signal)."""


@dataclass(frozen=True)
class RowSmoothingProblem:
    """One row subproblem of the global quadratic update.

    targets : (T,) scalar observations y_t.
    regressors : (T, d) lag vectors x_t.
    bias : (T, d) per-step state drift mu_t.
    rho : float, quadratic coupling weight (> 0).
    """

    targets: np.ndarray
    regressors: np.ndarray
    bias: np.ndarray
    rho: float

    def __post_init__(self):
        y = np.asarray(self.targets, dtype=np.float64)
        x = np.asarray(self.regressors, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if y.ndim != 1 or x.ndim != 2 or b.ndim != 2:
            raise DimensionError(
                f"expected targets (T,), regressors (T, d), bias (T, d); got "
                f"{y.shape}, {x.shape}, {b.shape}"
            )
        if not (y.shape[0] == x.shape[0] == b.shape[0]) or x.shape[1] != b.shape[1]:
            raise DimensionError(
                f"inconsistent shapes: targets {y.shape}, regressors {x.shape}, bias {b.shape}"
            )
        if y.shape[0] < 1:
            raise DimensionError("need at least one time step")
        if self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        for name, arr in (("targets", y), ("regressors", x), ("bias", b)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_steps(self) -> int:
        return self.targets.shape[0]

    @property
    def n_features(self) -> int:
        return self.regressors.shape[1]


@dataclass(frozen=True)
class SmoothedRow:
    """Smoothed state sequence (T, d); covariances attached only on request."""

    states: np.ndarray
    covariances: np.ndarray | None = None


@dataclass(frozen=True)
class CovarianceSchedule:
    """Data-independent smoother quantities shared across row problems.

    gains : (T, d) Kalman gains.
    smoother_gains : (T-1, d, d) backward-pass gain matrices.
    """

    gains: np.ndarray
    smoother_gains: np.ndarray
    rho: float

    @property
    def n_steps(self) -> int:
        return self.gains.shape[0]


def _locate_singular_step(regressors: np.ndarray, rho: float) -> int:
    # Cold path: replay the covariance recursion step by step to name the
    # first time index whose predicted covariance fails to factor.
    T, d = regressors.shape
    eye_over_rho = np.eye(d) / rho
    cov_pred = eye_over_rho.copy()
    for t in range(T):
        x = regressors[t]
        cov_x = cov_pred @ x
        gain = cov_x / (0.5 + x @ cov_x)
        cov_filt = cov_pred - np.outer(gain, cov_x)
        cov_filt = 0.5 * (cov_filt + cov_filt.T)
        if t < T - 1:
            cov_pred = cov_filt + eye_over_rho
            try:
                np.linalg.solve(cov_pred, cov_filt)
            except np.linalg.LinAlgError:
                return t + 1
    return T - 1


def covariance_schedule(regressors: np.ndarray, rho: float) -> CovarianceSchedule:
    """Run the covariance recursion once for a given design and rho."""
    regressors = np.ascontiguousarray(regressors, dtype=np.float64)
    if regressors.ndim != 2 or regressors.shape[0] < 1:
        raise DimensionError(f"regressors must be (T, d) with T >= 1, got {regressors.shape}")
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    try:
        gains, smoother_gains = _kernels.filter_gains(regressors, float(rho))
    except np.linalg.LinAlgError as exc:
        step = _locate_singular_step(regressors, rho)
        raise SmootherError(
            f"predicted state covariance singular at step {step} (rho={rho}); "
            "this should be impossible for rho > 0 and finite inputs"
        ) from exc
    return CovarianceSchedule(gains=gains, smoother_gains=smoother_gains, rho=float(rho))


def smooth_rows(
    targets: np.ndarray,
    regressors: np.ndarray,
    bias: np.ndarray,
    rho: float,
    schedule: CovarianceSchedule | None = None,
) -> np.ndarray:
    """Smooth m row problems that share regressors and rho.

    targets (T, m), bias (T, m, d) -> smoothed states (T, m, d).
    """
    if schedule is None:
        schedule = covariance_schedule(regressors, rho)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    regressors = np.ascontiguousarray(regressors, dtype=np.float64)
    bias = np.ascontiguousarray(bias, dtype=np.float64)
    return _kernels.smooth_means(
        targets, regressors, bias, schedule.gains, schedule.smoother_gains
    )


def smooth_row(
    problem: RowSmoothingProblem,
    schedule: CovarianceSchedule | None = None,
    with_covariances: bool = False,
) -> SmoothedRow:
    """Exact minimizer of the row quadratic, in O(T) after the gain schedule.

    Forward pass: the state predicted at step 1 is the drift mu_1 with
    covariance (1/rho) I, then each step folds in its scalar observation
    through the Kalman gain.  Backward pass: classical fixed-interval
    smoothing with gain C_t = Cov_filt(t) Cov_pred(t+1)^{-1}.

    A precomputed ``schedule`` (shared across rows) skips the covariance
    recursion.  ``with_covariances`` additionally returns the smoothed
    state covariances (diagnostic; computed outside the fast path).
    """
    if schedule is None:
        schedule = covariance_schedule(problem.regressors, problem.rho)
    elif schedule.n_steps != problem.n_steps:
        raise DimensionError(
            f"schedule covers {schedule.n_steps} steps, problem has {problem.n_steps}"
        )
    states = smooth_rows(
        problem.targets[:, None],
        problem.regressors,
        problem.bias[:, None, :],
        problem.rho,
        schedule=schedule,
    )[:, 0, :]
    covariances = smoothed_covariances(problem.regressors, problem.rho) if with_covariances else None
    return SmoothedRow(states=states, covariances=covariances)


def filter_covariances(regressors: np.ndarray, rho: float):
    """Filtered and predicted covariance sequences (diagnostic path).

    Returns (filtered (T, d, d), predicted (T, d, d)); predicted[0] is the
    prior covariance (1/rho) I.
    """
    regressors = np.asarray(regressors, dtype=np.float64)
    T, d = regressors.shape
    filtered = np.empty((T, d, d))
    predicted = np.empty((T, d, d))
    eye_over_rho = np.eye(d) / rho
    predicted[0] = eye_over_rho
    for t in range(T):
        if t > 0:
            predicted[t] = filtered[t - 1] + eye_over_rho
        x = regressors[t]
        cov_x = predicted[t] @ x
        gain = cov_x / (0.5 + x @ cov_x)
        cov = predicted[t] - np.outer(gain, cov_x)
        filtered[t] = 0.5 * (cov + cov.T)
    return filtered, predicted


def smoothed_covariances(regressors: np.ndarray, rho: float) -> np.ndarray:
    """Smoothed state covariances (T, d, d); diagnostic, not data-dependent."""
    filtered, predicted = filter_covariances(regressors, rho)
    T = filtered.shape[0]
    smoothed = np.empty_like(filtered)
    smoothed[T - 1] = filtered[T - 1]
    for t in range(T - 2, -1, -1):
        gain = np.linalg.solve(predicted[t + 1], filtered[t]).T
        cov = filtered[t] + gain @ (smoothed[t + 1] - predicted[t + 1]) @ gain.T
        smoothed[t] = 0.5 * (cov + cov.T)
    return smoothed


def dense_row_solve(problem: RowSmoothingProblem) -> SmoothedRow:
    """Reference solver: assemble and solve the row quadratic's normal equations.

    Verification oracle for :func:`smooth_row`; deliberately simple, dense,
    and independent of the recursive implementation.  Guarded to small
    instances (T * d <= 2000).
    """
    T, d = problem.n_steps, problem.n_features
    n = T * d
    if n > 2000:
        raise ValueError(f"dense solve guard: T * d = {n} exceeds 2000")
    y, X, mu = problem.targets, problem.regressors, problem.bias
    H = np.zeros((n, n))
    rhs = np.zeros(n)
    for t in range(T):
        sl = slice(t * d, (t + 1) * d)
        H[sl, sl] += 2.0 * np.outer(X[t], X[t])
        rhs[sl] += 2.0 * y[t] * X[t]
    # difference operator: (D a)_t = a_t - a_{t-1} with a_0 = 0
    D = np.kron(np.eye(T) - np.eye(T, k=-1), np.eye(d))
    H += problem.rho * D.T @ D
    rhs += problem.rho * D.T @ mu.ravel()
    states = np.linalg.solve(H, rhs).reshape(T, d)
    return SmoothedRow(states=states)
