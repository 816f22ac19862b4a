"""Domain types, lagged design construction, and objective evaluation.

Time indexing convention used throughout the package: observations of the
raw series are numbered 1..N (row 0 of the data array is time 1).  A fit
with lag order K uses the targets at times K+1..N, relabeled 1..T with
T = N - K.  Coefficient and difference paths are indexed by the relabeled
time; reported break points are always translated back to original time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SeriesLengthError(ValueError):
    """Series too short for the requested lag order."""


class DimensionError(ValueError):
    """Array shapes inconsistent with each other or with the declared sizes."""


def _as_float_matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """An N x p multivariate series; row t holds the observation at time t+1.

    All entries must be finite.  Instances are immutable and safe to share
    across threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _as_float_matrix(self.data, "data")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"series must be non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("series contains non-finite entries")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_times(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LaggedDesign:
    """Regression view of a series at a fixed lag order.

    Row i (0-based) regresses the observation at original time lag+i+1 on
    the stacked vector of its ``lag`` predecessors, most recent first.
    """

    targets: np.ndarray     # (T, p)
    regressors: np.ndarray  # (T, p*lag)
    lag: int
    t_offset: int           # original time of row 0 is t_offset + 1

    def __post_init__(self):
        tg = _as_float_matrix(self.targets, "targets")
        rg = _as_float_matrix(self.regressors, "regressors")
        if tg.shape[0] != rg.shape[0]:
            raise DimensionError(
                f"targets and regressors disagree on row count: {tg.shape[0]} vs {rg.shape[0]}"
            )
        if rg.shape[1] != tg.shape[1] * self.lag:
            raise DimensionError(
                f"regressor width {rg.shape[1]} != dim*lag = {tg.shape[1] * self.lag}"
            )
        for name, arr in (("targets", tg), ("regressors", rg)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_steps(self) -> int:
        return self.targets.shape[0]

    @property
    def dim(self) -> int:
        return self.targets.shape[1]

    @property
    def n_features(self) -> int:
        return self.regressors.shape[1]


def _check_path_blocks(blocks, lag: int) -> np.ndarray:
    arr = np.asarray(blocks, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"blocks must be (T, p, p*lag), got shape {arr.shape}")
    T, p, d = arr.shape
    if T < 1:
        raise DimensionError("path must contain at least one block")
    if d != p * lag:
        raise DimensionError(f"block width {d} != dim*lag = {p * lag}")
    if not np.isfinite(arr).all():
        raise ValueError("path contains non-finite entries")
    return arr


@dataclass(frozen=True)
class CoefficientPath:
    """Per-time-step VAR coefficients: T blocks of shape (p, p*lag).

    Block t stacks the lag matrices horizontally, lag-1 block leftmost,
    matching the regressor ordering of :class:`LaggedDesign`.
    """

    blocks: np.ndarray  # (T, p, p*lag)
    lag: int

    def __post_init__(self):
        arr = _check_path_blocks(self.blocks, self.lag)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def n_steps(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]


@dataclass(frozen=True)
class DiffPath:
    """Successive differences of a coefficient path (same block shape).

    Block 0 is the base coefficient matrix itself; block t (t >= 1) is the
    change from step t-1 to step t.  The cumulative sum of the blocks
    recovers the coefficient path.  The ADMM consensus copy and the scaled
    dual variables reuse this shape.
    """

    blocks: np.ndarray  # (T, p, p*lag)
    lag: int

    def __post_init__(self):
        arr = _check_path_blocks(self.blocks, self.lag)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def n_steps(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings for the fused-lasso segmentation problem.

    Parameters
    ----------
    lam : float
        Fusion penalty weight; larger values yield fewer break points.
    rho : float
        ADMM penalty parameter (> 0).
    lag : int
        VAR lag order K.
    eps_abs, eps_rel : float
        Absolute and relative stopping tolerances for the primal and dual
        residuals.
    max_iter : int
        Iteration cap; hitting it flags the result as non-converged.
    detect_threshold : float
        Frobenius-norm cutoff above which a difference block counts as a
        break point.
    seed : int, optional
        Carried along for provenance in reports; the solver itself is
        deterministic.
    adaptive_rho : bool
        If True, rescale rho by 2x when the primal/dual residual ratio
        exceeds 10 (off by default for reproducibility).
    """

    lam: float
    rho: float = 1.0
    lag: int = 1
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    max_iter: int = 5000
    detect_threshold: float = 0.005
    seed: int | None = None
    adaptive_rho: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")
        if self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("eps_abs and eps_rel must be > 0")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.detect_threshold <= 0:
            raise ValueError(f"detect_threshold must be > 0, got {self.detect_threshold}")


@dataclass(frozen=True)
class SegmentationResult:
    """Break points and per-segment VAR estimates for one solved instance.

    ``breakpoints`` are in original series time; each entry is the first
    time index of a new regime.  ``segment_coeffs`` has one entry per
    segment (= number of breaks + 1).  ``theta_path`` is the fused
    difference path (the exactly-sparse consensus estimate) whose nonzero
    blocks certify the breaks.
    """

    breakpoints: tuple[int, ...]
    segment_coeffs: tuple
    theta_path: DiffPath
    iterations: int
    primal_residuals: np.ndarray
    dual_residuals: np.ndarray
    objective: float
    converged: bool
    config: SolverConfig | None = field(repr=False, default=None)

    def __post_init__(self):
        bp = tuple(int(b) for b in self.breakpoints)
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError(f"breakpoints must be strictly increasing, got {bp}")
        if len(self.segment_coeffs) != len(bp) + 1:
            raise ValueError(
                f"expected {len(bp) + 1} segment fits for {len(bp)} breaks, "
                f"got {len(self.segment_coeffs)}"
            )
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "segment_coeffs", tuple(self.segment_coeffs))


def build_lagged_design(series: TimeSeries, lag: int) -> LaggedDesign:
    """Build the lagged regression view of ``series`` at lag order ``lag``.

    Returns N - lag rows; the row for target time t stacks the lag
    observations x_{t-1}, ..., x_{t-lag} into one vector, most recent
    first.  The first ``lag`` time steps carry no usable row (no padding
    is invented).

    Raises
    ------
    SeriesLengthError
        If N < lag + 2, i.e. fewer than one regression row plus one
        penalized difference.
    """
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    n, p = series.n_times, series.dim
    if n < lag + 2:
        raise SeriesLengthError(
            f"series of length N={n} is too short for lag K={lag}; need N >= K + 2"
        )
    t = n - lag
    data = series.data
    targets = data[lag:]
    regressors = np.empty((t, p * lag))
    for k in range(1, lag + 1):
        regressors[:, (k - 1) * p : k * p] = data[lag - k : n - k]
    return LaggedDesign(targets=targets, regressors=regressors, lag=lag, t_offset=lag)


def objective(path: CoefficientPath, design: LaggedDesign, lam: float) -> float:
    """Penalized least-squares objective of a coefficient path.

    Sum of squared one-step-ahead residuals plus ``lam`` times the sum of
    Frobenius norms of successive coefficient differences (blocks 2..T).
    """
    blocks = path.blocks
    if blocks.shape[0] != design.n_steps:
        raise DimensionError(
            f"path has {blocks.shape[0]} steps but design has {design.n_steps}"
        )
    if blocks.shape[2] != design.n_features:
        raise DimensionError(
            f"path block width {blocks.shape[2]} != design features {design.n_features}"
        )
    pred = np.einsum("tij,tj->ti", blocks, design.regressors)
    fit = float(np.sum((design.targets - pred) ** 2))
    diffs = blocks[1:] - blocks[:-1]
    penalty = float(np.sum(np.sqrt(np.sum(diffs**2, axis=(1, 2)))))
    return fit + lam * penalty


def diff_to_coeff(diff: DiffPath) -> CoefficientPath:
    """Cumulative sum of difference blocks; inverse of :func:`coeff_to_diff`."""
    return CoefficientPath(blocks=np.cumsum(diff.blocks, axis=0), lag=diff.lag)


def coeff_to_diff(path: CoefficientPath) -> DiffPath:
    """First differences of a coefficient path, keeping block 0 as the base."""
    blocks = np.diff(path.blocks, axis=0, prepend=np.zeros_like(path.blocks[:1]))
    return DiffPath(blocks=blocks, lag=path.lag)


def path_norms(diff: DiffPath) -> np.ndarray:
    """Frobenius norm of each difference block, as a length-T vector."""
    return np.sqrt(np.sum(diff.blocks**2, axis=(1, 2)))


def zero_diff_path(n_steps: int, dim: int, lag: int) -> DiffPath:
    return DiffPath(blocks=np.zeros((n_steps, dim, dim * lag)), lag=lag)
