"""The R-transform distance and its behaviour under T, dilation and free sums.

``d(mu, nu) = sup_{0 < y <= 1/4} |R_mu(-iy) - R_nu(-iy)| / y^2``, with the
sup taken over a geometric grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .free_conv_rg import RGIterate, r_eval_iterate, renormalize_T
from .measures import MeasureSpec, Semicircle, dilate, q3_check
from .transforms import TransformError, TransformHandle, r_transform

SLACK = 1e-9
IDENTICAL_TOL = 1e-9


class DistanceEvaluationError(ArithmeticError):
    def __init__(self, y: float, cause: Exception):
        super().__init__(f"R-transform evaluation failed at y={y:.6g}: {cause}")
        self.y = y
        self.cause = cause


class UndefinedRatioError(ZeroDivisionError):
    """Contraction ratio of two laws at distance zero."""


class PropertyViolation(AssertionError):
    def __init__(self, name: str, lhs: float, bound: float):
        super().__init__(f"{name}: {lhs!r} > {bound!r} + {SLACK}")
        self.lhs = lhs
        self.bound = bound


@dataclass(frozen=True)
class MetricGrid:
    y_min: float = 1e-4
    y_max: float = 0.25
    points: int = 200

    def __post_init__(self):
        if not 0 < self.y_min < self.y_max <= 0.25:
            raise ValueError("grid needs 0 < y_min < y_max <= 1/4")
        if self.points < 2:
            raise ValueError("grid needs at least 2 points")

    @property
    def ys(self) -> np.ndarray:
        ys = np.geomspace(self.y_min, self.y_max, self.points)
        ys[-1] = self.y_max
        return ys

    def refined(self, factor: int = 4) -> "MetricGrid":
        return MetricGrid(self.y_min, self.y_max, (self.points - 1) * factor + 1)

    def to_dict(self) -> dict:
        return {"y_min": self.y_min, "y_max": self.y_max, "points": self.points}


@dataclass(frozen=True)
class FreeCombination:
    """Law of ``sum_i scale_i (a_{i,1} + ... + a_{i,count_i})`` for free copies.

    Each term is ``(law, scale, count)``; the R-transform is
    ``sum_i count_i scale_i R_i(scale_i z)``.
    """

    terms: tuple

    @property
    def variance(self) -> float:
        return sum(count * scale**2 * _variance_of(law) for law, scale, count in self.terms)

    @property
    def mean(self) -> float:
        return sum(count * scale * _mean_of(law) for law, scale, count in self.terms)


def free_sum(*laws) -> FreeCombination:
    return FreeCombination(tuple((law, 1.0, 1) for law in laws))


def clt_sum(law, n: int) -> FreeCombination:
    """Law of ``n^{-1/2} (a_1 + ... + a_n)``."""
    return FreeCombination(((law, 1.0 / math.sqrt(n), n),))


Law = Union[MeasureSpec, RGIterate, FreeCombination, TransformHandle]


def _mean_of(law) -> float:
    if isinstance(law, TransformHandle):
        law = law.source
    if isinstance(law, RGIterate):
        return float(law.cumulants.values[0])
    if isinstance(law, FreeCombination):
        return law.mean
    return q3_check(law).mean


def _variance_of(law) -> float:
    if isinstance(law, TransformHandle):
        law = law.source
    if isinstance(law, RGIterate):
        return float(law.cumulants.values[1])
    if isinstance(law, FreeCombination):
        return law.variance
    return q3_check(law).variance


def in_q3(law) -> bool:
    if isinstance(law, TransformHandle):
        law = law.source
    if isinstance(law, (RGIterate, FreeCombination)):
        return abs(_mean_of(law)) <= 1e-10 and abs(_variance_of(law) - 1) <= 1e-10
    return q3_check(law).is_member


def r_evaluator(law, handle: Optional[TransformHandle] = None) -> Callable:
    """Function ``z -> R_law(z)`` for any supported law representation."""
    base = handle or TransformHandle(Semicircle())
    if isinstance(law, TransformHandle):
        return lambda z: np.asarray(r_transform(law, z))
    if isinstance(law, RGIterate):
        return lambda z: np.asarray(r_eval_iterate(law, z, base))
    if isinstance(law, FreeCombination):
        parts = [(r_evaluator(sub, handle), scale, count) for sub, scale, count in law.terms]
        return lambda z: sum(count * scale * f(scale * np.asarray(z)) for f, scale, count in parts)
    h = TransformHandle(law, base.newton_tol, base.newton_max_iter, base.eval_axis_sign)
    return lambda z: np.asarray(r_transform(h, z))


@dataclass(frozen=True)
class DistanceReport:
    value: float
    argmax_y: float
    residuals: np.ndarray = field(repr=False)
    grid: MetricGrid = MetricGrid()
    extended_domain: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmax_y": self.argmax_y,
            "grid": self.grid.to_dict(),
            "extended_domain": self.extended_domain,
        }

    def csv_rows(self):
        return [(float(y), float(r)) for y, r in self.residuals]


def _axis_points(ys, handle: Optional[TransformHandle]):
    sign = 1.0 if handle is not None and handle.eval_axis_sign == "upper" else -1.0
    return sign * 1j * ys


def _evaluate(f, zs, ys):
    try:
        return np.asarray(f(zs), dtype=complex)
    except TransformError:
        for z, y in zip(zs, ys):
            try:
                f(np.array([z]))
            except TransformError as exc:
                raise DistanceEvaluationError(float(y), exc) from exc
        raise


def distance(mu: Law, nu: Law, grid: MetricGrid = MetricGrid(),
             handle: Optional[TransformHandle] = None, extended: bool = False) -> DistanceReport:
    """Grid sup of ``|R_mu(-iy) - R_nu(-iy)| / y^2``.

    Laws outside Q3 are refused unless ``extended`` is set; the metric formula
    is then evaluated anyway and the report is flagged.
    """
    outside = not (in_q3(mu) and in_q3(nu))
    if outside and not extended:
        raise ValueError("distance arguments must be in Q3 (pass extended=True to override)")
    ys = grid.ys
    zs = _axis_points(ys, handle)
    diff = _evaluate(r_evaluator(mu, handle), zs, ys) - _evaluate(r_evaluator(nu, handle), zs, ys)
    res = np.abs(diff) / ys**2
    if not np.all(np.isfinite(res)):
        bad = ys[~np.isfinite(res)][0]
        raise DistanceEvaluationError(float(bad), ValueError("non-finite residual"))
    i = int(np.argmax(res))
    return DistanceReport(float(res[i]), float(ys[i]), np.column_stack([ys, res]), grid, outside)


def apply_T(law) -> RGIterate:
    if isinstance(law, RGIterate):
        return renormalize_T(law)
    if isinstance(law, TransformHandle):
        law = law.source
    return renormalize_T(RGIterate.start(law))


def contraction_ratio(mu: Law, nu: Law, grid: MetricGrid = MetricGrid(),
                      handle: Optional[TransformHandle] = None) -> float:
    """``d(T mu, T nu) / d(mu, nu)``."""
    before = distance(mu, nu, grid, handle).value
    if before <= IDENTICAL_TOL:
        raise UndefinedRatioError(f"d(mu, nu) = {before:.3e}; ratio undefined")
    after = distance(apply_T(mu), apply_T(nu), grid, handle).value
    return after / before


def _dilated(law, lam: float):
    if lam == 1:
        return law
    if isinstance(law, (RGIterate, FreeCombination, TransformHandle)):
        return FreeCombination(((law, lam, 1),))
    return dilate(law, lam)


def _check(name, lhs, bound):
    if not lhs <= bound + SLACK:
        raise PropertyViolation(name, lhs, bound)
    return lhs, bound


def ideality_check(mu: Law, nu: Law, lam: float, grid: MetricGrid = MetricGrid(),
                   handle: Optional[TransformHandle] = None):
    """``d(lam mu, lam nu) <= lam^3 d(mu, nu)`` for ``lam`` in (0, 1]."""
    if not 0 < lam <= 1:
        raise ValueError("ideality is only checked for lam in (0, 1]")
    base = distance(mu, nu, grid, handle).value
    lhs = distance(_dilated(mu, lam), _dilated(nu, lam), grid, handle, extended=True).value
    return _check("ideality", lhs, lam**3 * base)


def subadditivity_check(a: Law, a2: Law, b: Law, b2: Law, grid: MetricGrid = MetricGrid(),
                        handle: Optional[TransformHandle] = None):
    """``d(a [+] a', b [+] b') <= d(a, b) + d(a', b')``."""
    lhs = distance(free_sum(a, a2), free_sum(b, b2), grid, handle, extended=True).value
    rhs = distance(a, b, grid, handle).value + distance(a2, b2, grid, handle).value
    return _check("subadditivity", lhs, rhs)


def clt_bound_check(mu: Law, n: int, grid: MetricGrid = MetricGrid(),
                    handle: Optional[TransformHandle] = None):
    """``d(S_n, rho) <= d(mu, rho) / sqrt(n)`` for ``S_n = n^{-1/2} sum a_i``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    rho = Semicircle()
    base = distance(mu, rho, grid, handle).value
    target = mu if n == 1 else clt_sum(mu, n)
    lhs = distance(target, rho, grid, handle).value
    return _check("clt_bound", lhs, base / math.sqrt(n))


def geometric_decay(seed: MeasureSpec, n_max: int, grid: MetricGrid = MetricGrid(),
                    handle: Optional[TransformHandle] = None) -> list[float]:
    """``d(T^n seed, rho)`` for n = 0..n_max."""
    rho = Semicircle()
    it = RGIterate.start(seed)
    out = [distance(it, rho, grid, handle).value]
    for _ in range(n_max):
        it = renormalize_T(it)
        out.append(distance(it, rho, grid, handle).value)
    return out


def distances_table(values: Sequence[float]):
    """Rows ``(n, d_n, d_n / d_{n-1}, 2^{-n/2} d_0)``; ratio is None where undefined."""
    rows = []
    for n, d in enumerate(values):
        ratio = None
        if n > 0 and values[n - 1] > IDENTICAL_TOL:
            ratio = d / values[n - 1]
        rows.append((n, d, ratio, 2.0 ** (-n / 2) * values[0]))
    return rows
