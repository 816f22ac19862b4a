"""Synthetic piecewise-stationary VAR data for tests and experiments.

Regime i governs times t in (b_i, b_{i+1}] (1-based), where b_0 = 0 and
the last boundary is N; a break time b is therefore the last time index of
the old regime, and the new regime starts at b + 1.

Randomness uses numpy's default PCG64 generator throughout, so a given
seed reproduces the same series bit-for-bit within one numpy version.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .core import DimensionError, TimeSeries


def companion_matrix(coeffs: np.ndarray) -> np.ndarray:
    """Companion form of a (p, p*K) stacked coefficient matrix."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 2 or coeffs.shape[1] % coeffs.shape[0] != 0:
        raise DimensionError(f"expected (p, p*K) coefficient matrix, got {coeffs.shape}")
    p = coeffs.shape[0]
    k = coeffs.shape[1] // p
    comp = np.zeros((p * k, p * k))
    comp[:p, :] = coeffs
    if k > 1:
        comp[p:, :-p] = np.eye(p * (k - 1))
    return comp


def spectral_radius(coeffs: np.ndarray) -> float:
    """Largest absolute eigenvalue of the companion matrix.

    A value below 1 certifies that the VAR process with these coefficients
    is stationary.
    """
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coeffs)))))


def random_stable_var(
    p: int, lag: int, radius_cap: float, seed: int | np.random.Generator | None = None
) -> np.ndarray:
    """Draw a (p, p*lag) coefficient matrix with spectral radius below the cap.

    Gaussian entries are rescaled lag-block by lag-block (block k by c^k),
    which scales the companion eigenvalues exactly by c, so one rescale
    lands strictly inside the cap.  Deterministic given a seed.
    """
    if not 0 < radius_cap < 1:
        raise ValueError(f"radius_cap must be in (0, 1), got {radius_cap}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    coeffs = rng.normal(0.0, 1.0 / np.sqrt(p * lag), size=(p, p * lag))
    radius = spectral_radius(coeffs)
    if radius >= radius_cap:
        c = 0.95 * radius_cap / radius
        for k in range(lag):
            coeffs[:, k * p : (k + 1) * p] *= c ** (k + 1)
    return coeffs


@dataclass(frozen=True)
class BreakVarSpec:
    """Generator settings for a structural-break VAR series.

    ``break_times`` must lie strictly between the lag order and the series
    length; ``segment_coeffs`` needs one (dim, dim*lag) matrix per regime,
    each with companion spectral radius below 1.
    """

    dim: int
    lag: int
    n_times: int
    break_times: tuple[int, ...]
    segment_coeffs: tuple[np.ndarray, ...]
    noise_sd: float = 0.1
    seed: int | None = None

    def __post_init__(self):
        if self.dim < 1 or self.lag < 1 or self.n_times < 1:
            raise ValueError("dim, lag, n_times must all be >= 1")
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        bt = tuple(int(b) for b in self.break_times)
        if any(b2 <= b1 for b1, b2 in zip(bt, bt[1:])):
            raise ValueError(f"break_times must be strictly increasing, got {bt}")
        if any(not (self.lag < b < self.n_times) for b in bt):
            raise ValueError(
                f"break_times must lie strictly inside ({self.lag}, {self.n_times}), got {bt}"
            )
        coeffs = tuple(np.asarray(c, dtype=np.float64) for c in self.segment_coeffs)
        if len(coeffs) != len(bt) + 1:
            raise ValueError(f"need {len(bt) + 1} regime matrices, got {len(coeffs)}")
        d = self.dim * self.lag
        for i, c in enumerate(coeffs):
            if c.shape != (self.dim, d):
                raise DimensionError(
                    f"regime {i} coefficients have shape {c.shape}, expected {(self.dim, d)}"
                )
            radius = spectral_radius(c)
            if radius >= 1.0:
                raise ValueError(
                    f"regime {i} is non-stationary: companion spectral radius {radius:.4f} >= 1"
                )
        for c in coeffs:
            c.setflags(write=False)
        object.__setattr__(self, "break_times", bt)
        object.__setattr__(self, "segment_coeffs", coeffs)

    @property
    def n_regimes(self) -> int:
        return len(self.segment_coeffs)


def random_break_var_spec(
    dim: int,
    lag: int,
    n_times: int,
    break_times,
    noise_sd: float = 0.1,
    seed: int | None = None,
    radius_cap: float = 0.9,
    min_distance: float = 0.5,
) -> BreakVarSpec:
    """Draw regime coefficients for a break spec with detectable regime changes.

    Each regime is a stable random VAR (spectral radius below
    ``radius_cap``); consecutive regimes are redrawn until their
    coefficients differ by at least ``min_distance`` in Frobenius norm.
    The default ``noise_sd`` of 0.1 places fusion penalties of order 1-5 in
    the informative range for series of a few hundred steps (the penalty
    competes with a squared-error term, so it scales with the square of the
    data scale).
    """
    rng = np.random.default_rng(seed)
    n_regimes = len(tuple(break_times)) + 1
    coeffs = [random_stable_var(dim, lag, radius_cap, rng)]
    for _ in range(1, n_regimes):
        for attempt in range(1000):
            cand = random_stable_var(dim, lag, radius_cap, rng)
            if np.linalg.norm(cand - coeffs[-1]) >= min_distance:
                coeffs.append(cand)
                break
        else:
            raise RuntimeError(
                f"could not draw a regime at distance >= {min_distance} in 1000 attempts"
            )
    return BreakVarSpec(
        dim=dim,
        lag=lag,
        n_times=n_times,
        break_times=tuple(break_times),
        segment_coeffs=tuple(coeffs),
        noise_sd=noise_sd,
        seed=seed,
    )


def simulate_break_var(
    spec: BreakVarSpec,
    burn_in: int = 200,
    initial_state: np.ndarray | None = None,
) -> TimeSeries:
    """Generate a series from a break spec; deterministic given its seed.

    The recursion starts from ``initial_state`` (lag window, shape
    (lag, dim), most recent observation first; zeros by default) and runs
    ``burn_in`` steps under the first regime before time 1 so the series
    starts near that regime's stationary law.
    """
    p, lag, n = spec.dim, spec.lag, spec.n_times
    window = np.zeros((lag, p))
    if initial_state is not None:
        init = np.asarray(initial_state, dtype=np.float64)
        if init.shape != (lag, p):
            raise DimensionError(f"initial_state must be (lag, dim) = {(lag, p)}, got {init.shape}")
        window = init.copy()
    rng = np.random.default_rng(spec.seed)
    noise = (
        rng.normal(0.0, spec.noise_sd, size=(burn_in + n, p))
        if spec.noise_sd > 0
        else np.zeros((burn_in + n, p))
    )
    data = np.empty((n, p))
    for step in range(burn_in + n):
        t = step - burn_in + 1  # original 1-based time; <= 0 during burn-in
        regime = 0 if t <= 0 else bisect_left(spec.break_times, t)
        x = spec.segment_coeffs[regime] @ window.ravel() + noise[step]
        if t >= 1:
            data[t - 1] = x
        window[1:] = window[:-1]
        window[0] = x
    return TimeSeries(data=data)
