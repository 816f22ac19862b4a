"""Hot numeric kernels: forward/backward smoothing recursions.

Two interchangeable backends live here.  The numba backend JIT-compiles
the per-time-step loops; the numpy backend is a line-for-line fallback.
Selection happens at import time: set ``TSBREAK_DISABLE_NUMBA=1`` (or
fail to have numba installed) to force the pure-numpy path.  Both
backends stay importable so tests and benchmarks can compare them.

Kernel contracts (shared by both backends):

``filter_gains(regressors, rho)``
    regressors: (T, d) lag vectors, rho > 0.  Returns the data-independent
    part of the smoother: per-step Kalman gains (T, d) and backward
    smoother gains (T-1, d, d).  The observation-noise variance is fixed
    at 1/2 and the state-noise covariance at (1/rho) I, which makes the
    smoother the exact minimizer of the per-row quadratic used in the
    global ADMM update.

``smooth_means(targets, regressors, bias, gains, smoother_gains)``
    targets: (T, m) one column per row problem; bias: (T, m, d) per-step
    state drift.  Returns (T, m, d) smoothed state sequences, one per
    column, reusing the shared gain schedule.

The row problems are independent, so ``smooth_means`` also exists in a
prange-parallel numba variant; it only pays off when m and the core count
are both large, so the serial variant is the default and
:func:`set_thread_count` switches them explicitly.
"""

from __future__ import annotations

import os

import numpy as np

_TRUTHY = ("1", "true", "yes", "on")


def _numba_disabled() -> bool:
    return os.environ.get("TSBREAK_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


def filter_gains_numpy(regressors: np.ndarray, rho: float):
    T, d = regressors.shape
    gains = np.empty((T, d))
    smoother_gains = np.empty((max(T - 1, 0), d, d))
    eye_over_rho = np.eye(d) / rho
    cov_pred = eye_over_rho.copy()
    for t in range(T):
        x = regressors[t]
        cov_x = cov_pred @ x
        gain = cov_x / (0.5 + x @ cov_x)
        gains[t] = gain
        cov_filt = cov_pred - np.outer(gain, cov_x)
        cov_filt = 0.5 * (cov_filt + cov_filt.T)
        if t < T - 1:
            cov_pred = cov_filt + eye_over_rho
            # C^t = cov_filt @ cov_pred^{-1}; both symmetric, so solve and
            # transpose instead of forming an explicit inverse.
            smoother_gains[t] = np.linalg.solve(cov_pred, cov_filt).T
    return gains, smoother_gains


def smooth_means_numpy(
    targets: np.ndarray,
    regressors: np.ndarray,
    bias: np.ndarray,
    gains: np.ndarray,
    smoother_gains: np.ndarray,
):
    T, d = regressors.shape
    m = targets.shape[1]
    mean_pred = np.empty((T, m, d))
    mean_filt = np.empty((T, m, d))
    mean_pred[0] = bias[0]
    for t in range(T):
        if t > 0:
            mean_pred[t] = mean_filt[t - 1] + bias[t]
        innov = targets[t] - mean_pred[t] @ regressors[t]
        mean_filt[t] = mean_pred[t] + innov[:, None] * gains[t][None, :]
    smoothed = np.empty((T, m, d))
    smoothed[T - 1] = mean_filt[T - 1]
    for t in range(T - 2, -1, -1):
        smoothed[t] = mean_filt[t] + (smoothed[t + 1] - mean_pred[t + 1]) @ smoother_gains[t].T
    return smoothed


HAS_NUMBA = False

if not _numba_disabled():
    try:
        from numba import njit, prange

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via the env flag instead
        HAS_NUMBA = False

if HAS_NUMBA:

    @njit(cache=True)
    def filter_gains_numba(regressors, rho):
        T, d = regressors.shape
        gains = np.empty((T, d))
        smoother_gains = np.empty((max(T - 1, 0), d, d))
        eye_over_rho = np.eye(d) / rho
        cov_pred = eye_over_rho.copy()
        for t in range(T):
            x = regressors[t]
            cov_x = cov_pred @ x
            gain = cov_x / (0.5 + x @ cov_x)
            gains[t] = gain
            cov_filt = cov_pred - np.outer(gain, cov_x)
            cov_filt = 0.5 * (cov_filt + cov_filt.T)
            if t < T - 1:
                cov_pred = cov_filt + eye_over_rho
                smoother_gains[t] = np.linalg.solve(cov_pred, cov_filt).T
        return gains, smoother_gains

    @njit(cache=True)
    def smooth_means_numba(targets, regressors, bias, gains, smoother_gains):
        T, d = regressors.shape
        m = targets.shape[1]
        smoothed = np.empty((T, m, d))
        for j in range(m):
            mean_pred = np.empty((T, d))
            mean_filt = np.empty((T, d))
            mean_pred[0] = bias[0, j]
            for t in range(T):
                if t > 0:
                    mean_pred[t] = mean_filt[t - 1] + bias[t, j]
                innov = targets[t, j] - regressors[t] @ mean_pred[t]
                mean_filt[t] = mean_pred[t] + innov * gains[t]
            smoothed[T - 1, j] = mean_filt[T - 1]
            for t in range(T - 2, -1, -1):
                smoothed[t, j] = mean_filt[t] + smoother_gains[t] @ (
                    smoothed[t + 1, j] - mean_pred[t + 1]
                )
        return smoothed

    @njit(parallel=True, cache=True)
    def smooth_means_numba_parallel(targets, regressors, bias, gains, smoother_gains):
        T, d = regressors.shape
        m = targets.shape[1]
        smoothed = np.empty((T, m, d))
        for j in prange(m):
            mean_pred = np.empty((T, d))
            mean_filt = np.empty((T, d))
            mean_pred[0] = bias[0, j]
            for t in range(T):
                if t > 0:
                    mean_pred[t] = mean_filt[t - 1] + bias[t, j]
                innov = targets[t, j] - regressors[t] @ mean_pred[t]
                mean_filt[t] = mean_pred[t] + innov * gains[t]
            smoothed[T - 1, j] = mean_filt[T - 1]
            for t in range(T - 2, -1, -1):
                smoothed[t, j] = mean_filt[t] + smoother_gains[t] @ (
                    smoothed[t + 1, j] - mean_pred[t + 1]
                )
        return smoothed

    filter_gains = filter_gains_numba
    smooth_means = smooth_means_numba
else:
    filter_gains_numba = None
    smooth_means_numba = None
    smooth_means_numba_parallel = None
    filter_gains = filter_gains_numpy
    smooth_means = smooth_means_numpy


def backend_name() -> str:
    """Name of the active kernel backend: 'numba' or 'numpy'."""
    return "numba" if HAS_NUMBA else "numpy"


def set_thread_count(n: int) -> int:
    """Select worker threads for the row smoother; returns the count in effect.

    0 (auto) and 1 keep the serial row loop, which wins whenever the rows
    are few or short; n > 1 switches to the prange-parallel kernel capped
    at numba's configured thread limit.  A no-op on the numpy backend.
    """
    global smooth_means
    if n < 0:
        raise ValueError(f"thread count must be >= 0, got {n}")
    if not HAS_NUMBA:
        return 1
    import numba

    if n > 1:
        threads = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(threads)
        smooth_means = smooth_means_numba_parallel
        return threads
    smooth_means = smooth_means_numba
    return 1
