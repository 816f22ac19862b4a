"""Break-point extraction and per-segment VAR refits.

Break points are reported in original series time: a break at time b means
the regime in force from b onward differs from the one before it.  The
difference-path block at relabeled step t corresponds to original time
t + lag, so detection adds that offset back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import admm
from .core import (
    DiffPath,
    SegmentationResult,
    SolverConfig,
    TimeSeries,
    build_lagged_design,
    diff_to_coeff,
    objective,
    path_norms,
)


@dataclass(frozen=True)
class SegmentCoefficients:
    """OLS VAR fit for one segment [start, end] (original time, inclusive).

    ``coeffs`` is None when the segment has fewer than dim*lag + 1 usable
    regression rows; ``too_short`` flags that case instead of raising.
    """

    start: int
    end: int
    coeffs: np.ndarray | None
    n_rows: int
    too_short: bool = False


def detect_changepoints(w: DiffPath, threshold: float, t_offset: int | None = None) -> list[int]:
    """Times (original indexing) whose difference block exceeds ``threshold``.

    Only blocks t >= 2 in relabeled time qualify; the base block holds the
    initial coefficients, not a change.  ``t_offset`` defaults to the
    path's lag order.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    offset = w.lag if t_offset is None else t_offset
    norms = path_norms(w)
    return [int(i + 1 + offset) for i in range(1, w.n_steps) if norms[i] > threshold]


def _segment_bounds(breakpoints: Sequence[int], n_times: int) -> list[tuple[int, int]]:
    bp = [int(b) for b in breakpoints]
    if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
        raise ValueError(f"breakpoints must be strictly increasing, got {bp}")
    if bp and (bp[0] < 2 or bp[-1] > n_times):
        raise ValueError(f"breakpoints {bp} outside valid range [2, {n_times}]")
    edges = [1] + bp + [n_times + 1]
    return [(edges[i], edges[i + 1] - 1) for i in range(len(edges) - 1)]


def refit_segments(
    series: TimeSeries, breakpoints: Sequence[int], lag: int
) -> list[SegmentCoefficients]:
    """Ordinary least squares VAR fit per segment.

    ``breakpoints`` follow the :func:`detect_changepoints` convention: each
    entry is the first time index of a new regime.  A segment's fit uses
    only regression rows whose full lag window lies inside the segment, so
    the first ``lag`` rows after each break are dropped.
    """
    design = build_lagged_design(series, lag)
    d = design.n_features
    results = []
    for start, end in _segment_bounds(breakpoints, series.n_times):
        lo = max(start - 1, 0)              # row index of first fully-inside target
        hi = end - lag - 1                  # row index of last target in segment
        n_rows = hi - lo + 1 if hi >= lo else 0
        if n_rows < d + 1:
            results.append(
                SegmentCoefficients(start=start, end=end, coeffs=None, n_rows=n_rows, too_short=True)
            )
            continue
        X = design.regressors[lo : hi + 1]
        Y = design.targets[lo : hi + 1]
        coeffs, *_ = np.linalg.lstsq(X, Y, rcond=None)
        results.append(
            SegmentCoefficients(start=start, end=end, coeffs=coeffs.T, n_rows=n_rows)
        )
    return results


def plugin_coefficients(w: DiffPath, breakpoints: Sequence[int], n_times: int) -> list[np.ndarray]:
    """Per-segment coefficients read directly off the fused path.

    Alternative to the OLS refit: within a fused segment the cumulative
    path is constant, so the block at the segment's first usable step is
    the segment's coefficient estimate.
    """
    path = diff_to_coeff(w).blocks
    lag = w.lag
    out = []
    for start, _ in _segment_bounds(breakpoints, n_times):
        idx = min(max(start - lag - 1, 0), path.shape[0] - 1)
        out.append(path[idx].copy())
    return out


def segment_series(
    series: TimeSeries,
    config: SolverConfig,
    progress: admm.ProgressFn | None = None,
) -> SegmentationResult:
    """Full pipeline: solve, threshold the fused path, refit each segment."""
    result = admm.solve(series, config, progress=progress)
    breakpoints = detect_changepoints(result.w, config.detect_threshold)
    segments = refit_segments(series, breakpoints, config.lag)
    design = build_lagged_design(series, config.lag)
    obj = objective(diff_to_coeff(result.w), design, config.lam)
    return SegmentationResult(
        breakpoints=tuple(breakpoints),
        segment_coeffs=tuple(segments),
        theta_path=result.w,
        iterations=result.iterations,
        primal_residuals=result.primal_residuals,
        dual_residuals=result.dual_residuals,
        objective=obj,
        converged=result.converged,
        config=config,
    )
