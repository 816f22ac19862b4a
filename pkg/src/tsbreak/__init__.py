"""Exact segmentation of multivariate time series into VAR regimes.

The estimator fits one coefficient matrix per time step under a fused
group penalty that forces consecutive matrices to coincide except at a
sparse set of break points.  The convex program is solved exactly by ADMM
whose quadratic step runs in time linear in the series length via
row-wise Kalman smoothing.
"""

from .admm import AdmmResult, AdmmState, group_soft_threshold, solve
from .core import (
    CoefficientPath,
    DiffPath,
    DimensionError,
    LaggedDesign,
    SegmentationResult,
    SeriesLengthError,
    SolverConfig,
    TimeSeries,
    build_lagged_design,
    coeff_to_diff,
    diff_to_coeff,
    objective,
)
from .kalman import RowSmoothingProblem, SmoothedRow, dense_row_solve, smooth_row
from .segment import (
    SegmentCoefficients,
    detect_changepoints,
    plugin_coefficients,
    refit_segments,
    segment_series,
)
from .simulate import (
    BreakVarSpec,
    random_break_var_spec,
    random_stable_var,
    simulate_break_var,
    spectral_radius,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmResult",
    "AdmmState",
    "BreakVarSpec",
    "CoefficientPath",
    "DiffPath",
    "DimensionError",
    "LaggedDesign",
    "RowSmoothingProblem",
    "SegmentCoefficients",
    "SegmentationResult",
    "SeriesLengthError",
    "SmoothedRow",
    "SolverConfig",
    "TimeSeries",
    "build_lagged_design",
    "coeff_to_diff",
    "dense_row_solve",
    "detect_changepoints",
    "diff_to_coeff",
    "group_soft_threshold",
    "objective",
    "plugin_coefficients",
    "random_break_var_spec",
    "random_stable_var",
    "refit_segments",
    "segment_series",
    "simulate_break_var",
    "smooth_row",
    "solve",
    "spectral_radius",
]
