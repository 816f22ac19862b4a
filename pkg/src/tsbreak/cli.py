"""Command-line front end: simulate data, fit models, re-threshold reports.

Machine-readable results go to standard output or to files; progress and
diagnostics go to standard error.  A non-converged fit is still a valid
report (flagged in the output), not a process failure.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import click
import numpy as np

from . import _kernels
from .core import SolverConfig, TimeSeries
from .segment import plugin_coefficients, segment_series
from .simulate import BreakVarSpec, random_break_var_spec, simulate_break_var

REPORT_SCHEMA_VERSION = 1
SIDECAR_SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "lambda", "rho", "lag", "eps_abs", "eps_rel", "max_iter", "detect_threshold", "seed",
}


class SpecError(click.ClickException):
    """Simulation spec failed validation; message carries the field path."""


def _require(obj: dict, key: str, kind, path: str, optional: bool = False, default=None):
    if key not in obj:
        if optional:
            return default
        raise SpecError(f"{path}.{key}: missing required field")
    value = obj[key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SpecError(f"{path}.{key}: must be an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SpecError(f"{path}.{key}: must be a number, got {value!r}")
        value = float(value)
    elif kind is list and not isinstance(value, list):
        raise SpecError(f"{path}.{key}: must be an array, got {value!r}")
    return value


def parse_break_spec(obj: dict, path: str = "spec") -> tuple[BreakVarSpec, int]:
    """Build a BreakVarSpec from its JSON form, naming bad fields precisely."""
    if not isinstance(obj, dict):
        raise SpecError(f"{path}: must be a JSON object")
    dim = _require(obj, "dim", int, path)
    lag = _require(obj, "lag", int, path, optional=True, default=1)
    n_times = _require(obj, "n_times", int, path)
    noise_sd = _require(obj, "noise_sd", float, path, optional=True, default=1.0)
    seed = _require(obj, "seed", int, path, optional=True)
    burn_in = _require(obj, "burn_in", int, path, optional=True, default=200)
    raw_breaks = _require(obj, "break_times", list, path, optional=True, default=[])
    breaks = []
    for i, b in enumerate(raw_breaks):
        if isinstance(b, bool) or not isinstance(b, int):
            raise SpecError(f"{path}.break_times[{i}]: must be an integer, got {b!r}")
        breaks.append(b)
    for key, value in (("dim", dim), ("lag", lag), ("n_times", n_times)):
        if value < 1:
            raise SpecError(f"{path}.{key}: must be a positive integer, got {value}")
    if burn_in < 0:
        raise SpecError(f"{path}.burn_in: must be >= 0, got {burn_in}")
    try:
        if "segment_coeffs" in obj:
            raw = _require(obj, "segment_coeffs", list, path)
            coeffs = tuple(np.asarray(c, dtype=np.float64) for c in raw)
            spec = BreakVarSpec(
                dim=dim, lag=lag, n_times=n_times, break_times=tuple(breaks),
                segment_coeffs=coeffs, noise_sd=noise_sd, seed=seed,
            )
        else:
            radius_cap = _require(obj, "radius_cap", float, path, optional=True, default=0.9)
            min_distance = _require(obj, "min_distance", float, path, optional=True, default=0.5)
            spec = random_break_var_spec(
                dim, lag, n_times, breaks,
                noise_sd=noise_sd, seed=seed,
                radius_cap=radius_cap, min_distance=min_distance,
            )
    except (ValueError, TypeError) as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return spec, burn_in


def _write_csv(series: TimeSeries, out_path: Path) -> None:
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(series.dim)])
        for row in series.data:
            writer.writerow([repr(float(v)) for v in row])


def read_series_csv(path: Path) -> TimeSeries:
    """Parse a header-first CSV of floats; errors name the row and column."""
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise click.ClickException(f"{path}: empty file, expected a header row")
        rows = []
        for r, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise click.ClickException(
                    f"{path}: row {r} has {len(record)} fields, header has {len(header)}"
                )
            values = []
            for c, cell in enumerate(record):
                try:
                    v = float(cell)
                except ValueError:
                    raise click.ClickException(
                        f"{path}: row {r}, column {header[c]}: cannot parse {cell!r} as a number"
                    )
                if not math.isfinite(v):
                    raise click.ClickException(
                        f"{path}: row {r}, column {header[c]}: non-finite value {cell!r}"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise click.ClickException(f"{path}: no data rows")
    return TimeSeries(data=np.asarray(rows))


def _parse_lambda_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise click.ClickException(f"--lambda: cannot parse {text!r} as comma-separated numbers")
    if not values:
        raise click.ClickException("--lambda: empty value list")
    return values


def _load_config_file(path: Path) -> dict:
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{path}: invalid JSON ({exc})")
    if not isinstance(obj, dict):
        raise click.ClickException(f"{path}: config must be a JSON object")
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise click.ClickException(f"{path}: unknown config keys {sorted(unknown)}")
    return obj


@click.group()
def main():
    """Segment a multivariate time series into piecewise-stationary VAR regimes."""


@main.command("simulate")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="JSON generator spec (dim, lag, n_times, break_times, noise_sd, seed, ...).")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="Output CSV path; a .meta.json sidecar is written next to it.")
def cmd_simulate(spec_path: Path, out_path: Path):
    """Generate a structural-break VAR series as CSV plus a truth sidecar."""
    try:
        obj = json.loads(spec_path.read_text())
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{spec_path}: invalid JSON ({exc})")
    spec, burn_in = parse_break_spec(obj)
    series = simulate_break_var(spec, burn_in=burn_in)
    try:
        _write_csv(series, out_path)
    except OSError as exc:
        raise click.ClickException(f"cannot write {out_path}: {exc}")
    sidecar = {
        "schema_version": SIDECAR_SCHEMA_VERSION,
        "dim": spec.dim,
        "lag": spec.lag,
        "n_times": spec.n_times,
        "break_times": list(spec.break_times),
        "noise_sd": spec.noise_sd,
        "seed": spec.seed,
        "burn_in": burn_in,
    }
    sidecar_path = out_path.with_suffix(".meta.json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    click.echo(f"wrote {series.n_times}x{series.dim} series to {out_path}", err=True)


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Input CSV (header row, one observation per line).")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="JSON config; command-line flags override its values.")
@click.option("--lambda", "lambdas", type=str, default=None,
              help="Comma-separated fusion penalty values, one fit per value.")
@click.option("--lag", type=int, default=None, help="VAR lag order K.")
@click.option("--rho", type=float, default=None, help="ADMM penalty parameter.")
@click.option("--eps-abs", type=float, default=None, help="Absolute stopping tolerance.")
@click.option("--eps-rel", type=float, default=None, help="Relative stopping tolerance.")
@click.option("--max-iter", type=int, default=None, help="Iteration cap per fit.")
@click.option("--threshold", type=float, default=None,
              help="Frobenius-norm cutoff for break detection.")
@click.option("--seed", type=int, default=None, help="Recorded in the report for provenance.")
@click.option("--threads", type=int, default=0, envvar="TSBREAK_THREADS", show_default=True,
              help="Worker threads for the row smoother (0 = auto).")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="Output JSON report path.")
def cmd_fit(data_path, config_path, lambdas, lag, rho, eps_abs, eps_rel, max_iter,
            threshold, seed, threads, out_path):
    """Fit the fused segmentation model for each penalty value and report."""
    file_cfg = _load_config_file(config_path) if config_path else {}

    def resolved(flag, key, default):
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    lam_raw = _parse_lambda_list(lambdas) if lambdas is not None else file_cfg.get("lambda", None)
    if lam_raw is None:
        raise click.ClickException("no lambda given: pass --lambda or a config with 'lambda'")
    lam_list = [float(v) for v in (lam_raw if isinstance(lam_raw, list) else [lam_raw])]

    config_kwargs = dict(
        rho=float(resolved(rho, "rho", 1.0)),
        lag=int(resolved(lag, "lag", 1)),
        eps_abs=float(resolved(eps_abs, "eps_abs", 1e-6)),
        eps_rel=float(resolved(eps_rel, "eps_rel", 1e-4)),
        max_iter=int(resolved(max_iter, "max_iter", 5000)),
        detect_threshold=float(resolved(threshold, "detect_threshold", 0.005)),
        seed=resolved(seed, "seed", None),
    )

    series = read_series_csv(data_path)
    threads_in_effect = _kernels.set_thread_count(threads)

    runs = []
    for lam in lam_list:
        try:
            config = SolverConfig(lam=lam, **config_kwargs)
        except ValueError as exc:
            raise click.ClickException(f"invalid config: {exc}")

        def progress(iteration, primal, dual, _lam=lam):
            if iteration % 50 == 0:
                click.echo(
                    f"[lambda={_lam:g}] iter {iteration}: primal {primal:.3e} dual {dual:.3e}",
                    err=True,
                )

        try:
            result = segment_series(series, config, progress=progress)
        except ValueError as exc:
            raise click.ClickException(str(exc))
        if not result.converged:
            click.echo(
                f"[lambda={lam:g}] did not converge within {config.max_iter} iterations",
                err=True,
            )

        norms = np.sqrt(np.sum(result.theta_path.blocks**2, axis=(1, 2)))
        times = [int(i + 1 + config.lag) for i in range(1, result.theta_path.n_steps)]
        fused = plugin_coefficients(result.theta_path, result.breakpoints, series.n_times)
        segments = [
            {
                "start": seg.start,
                "end": seg.end,
                "n_rows": seg.n_rows,
                "too_short": seg.too_short,
                "coeffs": None if seg.coeffs is None else seg.coeffs.tolist(),
                "fused_coeffs": fused[i].tolist(),
            }
            for i, seg in enumerate(result.segment_coeffs)
        ]
        runs.append(
            {
                "lambda": lam,
                "converged": result.converged,
                "iterations": result.iterations,
                "objective": result.objective,
                "breakpoints": list(result.breakpoints),
                "w_norms": {"times": times, "norms": [float(v) for v in norms[1:]]},
                "residuals": {
                    "primal": [float(v) for v in result.primal_residuals],
                    "dual": [float(v) for v in result.dual_residuals],
                },
                "segments": segments,
            }
        )

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {
            "lambda": lam_list,
            "rho": config_kwargs["rho"],
            "lag": config_kwargs["lag"],
            "eps_abs": config_kwargs["eps_abs"],
            "eps_rel": config_kwargs["eps_rel"],
            "max_iter": config_kwargs["max_iter"],
            "detect_threshold": config_kwargs["detect_threshold"],
            "seed": config_kwargs["seed"],
            "threads": threads_in_effect,
            "kernel_backend": _kernels.backend_name(),
        },
        "data": {"path": str(data_path), "n_times": series.n_times, "dim": series.dim},
        "runs": runs,
    }
    try:
        Path(out_path).write_text(json.dumps(report, indent=2) + "\n")
    except OSError as exc:
        raise click.ClickException(f"cannot write {out_path}: {exc}")
    click.echo(f"wrote report for {len(lam_list)} lambda value(s) to {out_path}", err=True)


@main.command("detect")
@click.option("--report", "report_path", required=True,
              type=click.Path(exists=True, path_type=Path), help="Report JSON from 'fit'.")
@click.option("--threshold", type=float, required=True,
              help="New Frobenius-norm cutoff applied to the stored traces.")
def cmd_detect(report_path: Path, threshold: float):
    """Re-threshold stored block norms; prints 'lambda<TAB>breakpoint' rows."""
    if threshold <= 0:
        raise click.ClickException(f"--threshold must be > 0, got {threshold}")
    try:
        report = json.loads(report_path.read_text())
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{report_path}: invalid JSON ({exc})")
    runs = report.get("runs")
    if not isinstance(runs, list):
        raise click.ClickException(f"{report_path}: missing 'runs' array")
    for i, run in enumerate(runs):
        norms_obj = run.get("w_norms")
        if (
            not isinstance(norms_obj, dict)
            or "times" not in norms_obj
            or "norms" not in norms_obj
        ):
            raise click.ClickException(f"{report_path}: runs[{i}] missing w_norms traces")
        lam = run.get("lambda")
        for time, norm in zip(norms_obj["times"], norms_obj["norms"]):
            if norm > threshold:
                click.echo(f"{lam:g}\t{time}")


if __name__ == "__main__":
    main()
