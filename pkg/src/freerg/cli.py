"""``freerg`` command line: contraction and density experiments, distances,
cumulant tables and free self-convolutions.

Exit codes: 0 success with all checks holding, 1 numerical failure or a
failed check, 2 input error.
"""
from __future__ import annotations

import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click
import numpy as np
import sympy

from .free_conv_rg import (
    RGIterate,
    iterate_T,
    measure_of_T,
    subordination_power,
)
from .measures import (
    Arcsine,
    Atomic,
    MeasureSchemaError,
    MeasureSpec,
    Semicircle,
    exact_moments,
    measure_from_json,
    measure_to_json,
    moment,
    q3_check,
    rademacher,
)
from .nc_calculus import cumulants_from_moments, format_exact
from .rg_metric import MetricGrid, distance, distances_table, geometric_decay
from .transforms import TransformError, TransformHandle, stieltjes_from_cauchy

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
RATIO_LIMIT = 2 ** -0.5 + 0.01
GAP_TOLERANCE = 2e-3

CLT_HEADER = ("n", "distance", "ratio", "bound")
DENSITY_HEADER = ("x", "density", "semicircle")
RESIDUAL_HEADER = ("y", "residual")

BUILTINS = {
    "rademacher": lambda: rademacher(),
    "semicircle": lambda: Semicircle(1.0),
    "arcsine": lambda: Arcsine(2.0),
}


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _num(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.17g}"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _num(v) for v in row))
    return "\n".join(lines) + "\n"


def load_measure(ref) -> MeasureSpec:
    """A measure from a dict, inline JSON, a JSON file path or a builtin name."""
    try:
        if isinstance(ref, dict):
            return measure_from_json(ref)
        text = str(ref).strip()
        if text in BUILTINS:
            return BUILTINS[text]()
        if text.startswith("{"):
            return measure_from_json(json.loads(text))
        path = Path(text)
        if path.exists():
            return measure_from_json(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in measure spec {ref!r}: {exc}") from exc
    except MeasureSchemaError as exc:
        raise InputError(f"measure spec schema error: {exc}") from exc
    raise InputError(f"cannot resolve measure spec {ref!r}")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    seed_measure: MeasureSpec = field(default_factory=rademacher)
    n_max: int = 10
    grid: MetricGrid = field(default_factory=MetricGrid)
    density_xs: tuple = (-3.0, 3.0, 1201)
    eps_schedule: tuple = (1e-2, 1e-3)
    output_dir: Optional[Path] = None
    gap_window: float = 1.5

    def __post_init__(self):
        if self.n_max < 1:
            raise InputError("n_max must be >= 1")
        lo, hi, pts = self.density_xs
        if not (hi > lo and int(pts) >= 2):
            raise InputError("density_xs needs max > min and points >= 2")
        e1, e2 = self.eps_schedule
        if not e1 > e2 > 0:
            raise InputError("eps_schedule needs eps1 > eps2 > 0")

    @property
    def xs(self) -> np.ndarray:
        lo, hi, pts = self.density_xs
        return np.linspace(lo, hi, int(pts))

    @classmethod
    def from_sources(cls, config_path: Optional[str], **overrides) -> "ExperimentConfig":
        doc = {}
        if config_path:
            try:
                doc = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read config {config_path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise InputError("config must be a JSON object")
        kw = {}
        try:
            if "seed_measure" in doc:
                kw["seed_measure"] = load_measure(doc["seed_measure"])
            if "n_max" in doc:
                kw["n_max"] = int(doc["n_max"])
            grid = dict(doc.get("grid", {}))
            xs = dict(doc.get("density_xs", {}))
            if "eps_schedule" in doc:
                kw["eps_schedule"] = tuple(float(e) for e in doc["eps_schedule"])
            if "output_dir" in doc:
                kw["output_dir"] = Path(doc["output_dir"])
            if "gap_window" in doc:
                kw["gap_window"] = float(doc["gap_window"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid config: {exc}") from exc

        # flags win over the file
        if overrides.get("seed") is not None:
            kw["seed_measure"] = load_measure(overrides["seed"])
        if overrides.get("n_max") is not None:
            kw["n_max"] = overrides["n_max"]
        for key, flag in (("y_min", "ymin"), ("y_max", "ymax"), ("points", "points")):
            if overrides.get(flag) is not None:
                grid[key] = overrides[flag]
        for key, flag in (("min", "xmin"), ("max", "xmax"), ("points", "xpoints")):
            if overrides.get(flag) is not None:
                xs[key] = overrides[flag]
        if overrides.get("eps") is not None:
            kw["eps_schedule"] = tuple(overrides["eps"])
        if overrides.get("output_dir") is not None:
            kw["output_dir"] = Path(overrides["output_dir"])
        if overrides.get("gap_window") is not None:
            kw["gap_window"] = overrides["gap_window"]
        try:
            kw["grid"] = MetricGrid(
                float(grid.get("y_min", 1e-4)), float(grid.get("y_max", 0.25)), int(grid.get("points", 200))
            )
            kw["density_xs"] = (
                float(xs.get("min", -3.0)), float(xs.get("max", 3.0)), int(xs.get("points", 1201))
            )
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid grid: {exc}") from exc
        return cls(**kw)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FREERG_THREADS", "1")))
    except ValueError:
        return 1


def _emit(path: Optional[Path], text: str) -> None:
    if path is None:
        click.echo(text, nl=False)
    else:
        _atomic_write(path, text)


def _require_q3(mu: MeasureSpec):
    cert = q3_check(mu)
    if not cert.is_member:
        click.echo(json.dumps({"error": "seed not in Q3", "certificate": cert.to_dict()}), err=True)
        sys.exit(EXIT_INPUT)


# ---------------------------------------------------------------------------
# commands


def run_clt(cfg: ExperimentConfig, handle: Optional[TransformHandle] = None):
    """Rows ``(n, d(T^n seed, rho), ratio, 2^{-n/2} d_0)`` and whether every
    defined ratio is within the contraction limit."""
    values = geometric_decay(cfg.seed_measure, cfg.n_max, cfg.grid, handle)
    rows = distances_table(values)
    ok = all(r[2] is None or r[2] <= RATIO_LIMIT for r in rows)
    return rows, ok


def _density_for(it: RGIterate, cfg: ExperimentConfig):
    xs = cfg.xs
    dens = measure_of_T(it, xs, cfg.eps_schedule)
    sc = np.sqrt(np.clip(4 - xs**2, 0, None)) / (2 * math.pi)
    window = np.abs(xs) <= cfg.gap_window
    gap = float(np.max(np.abs(dens.fs - sc)[window])) if window.any() else float("nan")
    return dens.fs, sc, gap


def run_density(cfg: ExperimentConfig):
    """Densities of ``T^n seed`` for n = 1..n_max with sup gaps to the semicircle."""
    iterates = [iterate_T(cfg.seed_measure, n) for n in range(1, cfg.n_max + 1)]

    def work(it):
        try:
            return it.n, _density_for(it, cfg), None
        except (TransformError, ArithmeticError, ValueError) as exc:
            return it.n, None, str(exc)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(work, iterates))
    gaps = {n: out[2] for n, out, err in results if out is not None}
    failures = {n: err for n, out, err in results if err is not None}
    ns = sorted(gaps)
    decreasing = all(
        gaps[b] <= gaps[a] + GAP_TOLERANCE for a, b in zip(ns, ns[1:]) if a >= 2
    )
    return results, gaps, failures, decreasing


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Renormalization-group experiments for the free central limit theorem."""


_grid_options = [
    click.option("--ymin", type=float, default=None, help="Smallest y of the metric grid."),
    click.option("--ymax", type=float, default=None, help="Largest y (<= 1/4)."),
    click.option("--points", type=int, default=None, help="Number of geometric grid points."),
]


def _with(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f

    return deco


@main.command("clt-run")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", default=None, help="Seed law: builtin name, JSON file or inline JSON.")
@click.option("--n-max", type=int, default=None)
@_with(_grid_options)
@click.option("--axis-sign", type=click.Choice(["lower", "upper"]), default="lower")
@click.option("--output-dir", type=click.Path(), default=None)
def clt_run(config_path, seed, n_max, ymin, ymax, points, axis_sign, output_dir):
    """Distances d(T^n seed, semicircle) for n = 0..n_max as CSV."""
    cfg = ExperimentConfig.from_sources(
        config_path, seed=seed, n_max=n_max, ymin=ymin, ymax=ymax, points=points, output_dir=output_dir
    )
    _require_q3(cfg.seed_measure)
    handle = TransformHandle(Semicircle(), eval_axis_sign=axis_sign)
    try:
        rows, ok = run_clt(cfg, handle)
    except (TransformError, ArithmeticError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    out = cfg.output_dir / "clt_run.csv" if cfg.output_dir else None
    _emit(out, _csv(CLT_HEADER, rows))
    sys.exit(EXIT_OK if ok else EXIT_NUMERIC)


@main.command("density-run")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", default=None)
@click.option("--n-max", type=int, default=None)
@click.option("--xmin", type=float, default=None)
@click.option("--xmax", type=float, default=None)
@click.option("--xpoints", type=int, default=None)
@click.option("--eps", type=float, nargs=2, default=None, help="Two Stieltjes offsets eps1 > eps2.")
@click.option("--gap-window", type=float, default=None, help="Sup gap taken over |x| <= this.")
@click.option("--output-dir", type=click.Path(), required=False, default=None)
def density_run(config_path, seed, n_max, xmin, xmax, xpoints, eps, gap_window, output_dir):
    """Densities of T^n seed against the semicircle, one CSV per n."""
    cfg = ExperimentConfig.from_sources(
        config_path, seed=seed, n_max=n_max, xmin=xmin, xmax=xmax, xpoints=xpoints,
        eps=eps, gap_window=gap_window, output_dir=output_dir,
    )
    _require_q3(cfg.seed_measure)
    if cfg.output_dir is None:
        raise InputError("density-run needs --output-dir (or output_dir in the config)")
    results, gaps, failures, decreasing = run_density(cfg)
    xs = cfg.xs
    for n, out, err in results:
        if out is None:
            click.echo(f"n={n}: {err}", err=True)
            continue
        fs, sc, _ = out
        _atomic_write(cfg.output_dir / f"density_n{n}.csv", _csv(DENSITY_HEADER, zip(xs, fs, sc)))
    summary = {
        "seed": measure_to_json(cfg.seed_measure),
        "gap_window": cfg.gap_window,
        "eps_schedule": list(cfg.eps_schedule),
        "sup_gaps": {str(n): g for n, g in sorted(gaps.items())},
        "failures": {str(n): e for n, e in sorted(failures.items())},
        "gaps_decreasing_from_n2": decreasing,
    }
    _atomic_write(cfg.output_dir / "density_summary.json", json.dumps(summary, indent=2) + "\n")
    click.echo(json.dumps(summary["sup_gaps"]))
    sys.exit(EXIT_OK if decreasing and not failures else EXIT_NUMERIC)


@main.command("distance")
@click.argument("spec_a")
@click.argument("spec_b")
@_with(_grid_options)
@click.option("--axis-sign", type=click.Choice(["lower", "upper"]), default="lower")
@click.option("--extended", is_flag=True, help="Allow laws outside Q3.")
@click.option("--residuals-csv", type=click.Path(), default=None)
def distance_cmd(spec_a, spec_b, ymin, ymax, points, axis_sign, extended, residuals_csv):
    """Distance between two laws as a JSON report."""
    a, b = load_measure(spec_a), load_measure(spec_b)
    try:
        grid = MetricGrid(ymin or 1e-4, ymax or 0.25, points or 200)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    handle = TransformHandle(Semicircle(), eval_axis_sign=axis_sign)
    try:
        report = distance(a, b, grid, handle, extended=extended)
    except (TransformError, ArithmeticError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if residuals_csv:
        _atomic_write(Path(residuals_csv), _csv(RESIDUAL_HEADER, report.csv_rows()))
    click.echo(json.dumps(report.to_dict()))


@main.command("cumulants")
@click.argument("spec")
@click.option("--order", "K", type=int, default=6, show_default=True)
def cumulants_cmd(spec, K):
    """Moments and free cumulants up to order K."""
    if K < 1:
        raise InputError("order must be >= 1")
    mu = load_measure(spec)
    if isinstance(mu, Atomic) and not mu.is_rational:
        moments = tuple(moment(mu, k) for k in range(1, K + 1))
        kappa = cumulants_from_moments(moments, method="recursive").values
    else:
        try:
            moments = exact_moments(mu, K)
        except TypeError as exc:
            raise InputError(str(exc)) from exc
        kappa = [
            sympy.expand(k) if isinstance(k, sympy.Basic) else k
            for k in cumulants_from_moments(moments).values
        ]
    click.echo(json.dumps({
        "order": K,
        "moments": [format_exact(m) for m in moments],
        "cumulants": [format_exact(k) for k in kappa],
    }))


@main.command("convolve")
@click.argument("spec")
@click.option("--power", type=float, default=2.0, show_default=True, help="Free convolution power t >= 1.")
@click.option("--xmin", type=float, default=-3.0, show_default=True)
@click.option("--xmax", type=float, default=3.0, show_default=True)
@click.option("--xpoints", type=int, default=1201, show_default=True)
@click.option("--eps", type=float, nargs=2, default=(1e-2, 1e-3), show_default=True)
@click.option("--output", type=click.Path(), default=None)
def convolve_cmd(spec, power, xmin, xmax, xpoints, eps, output):
    """Density of the t-fold free self-convolution as CSV (x, density)."""
    mu = load_measure(spec)
    if power < 1:
        raise InputError("power must be >= 1")
    if not (xmax > xmin and xpoints >= 2 and eps[0] > eps[1] > 0):
        raise InputError("need xmax > xmin, xpoints >= 2, eps1 > eps2 > 0")
    xs = np.linspace(xmin, xmax, xpoints)
    handle = TransformHandle(mu)
    try:
        dens = stieltjes_from_cauchy(lambda z: subordination_power(handle, power, z), xs, eps)
    except (TransformError, ArithmeticError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    _emit(Path(output) if output else None, _csv(("x", "density"), zip(dens.xs, dens.fs)))


if __name__ == "__main__":  # pragma: no cover
    main()
