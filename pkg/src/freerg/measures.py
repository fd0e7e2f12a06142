"""Probability laws on the real line and their moments.

Five representations are supported: finitely many atoms, the semicircle law
of variance ``sigma**2``, the arcsine law on ``(-a, a)``, the standardized
Bernoulli law, and a density sampled on a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Union

import numpy as np

from .nc_calculus import catalan

Q3_TOL = 1e-10


class DegenerateMeasureError(ValueError):
    """The law has zero (or non-finite) variance."""


class MeasureSchemaError(ValueError):
    """A measure-spec JSON document does not match the schema."""


@dataclass(frozen=True)
class Atomic:
    atoms: tuple[tuple[Real, Real], ...]

    def __post_init__(self):
        atoms = tuple((x, w) for x, w in self.atoms)
        if not atoms:
            raise ValueError("atomic measure needs at least one atom")
        if any(w <= 0 for _, w in atoms):
            raise ValueError("atom weights must be positive")
        total = sum(float(w) for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom weights sum to {total}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def positions(self) -> np.ndarray:
        return np.array([float(x) for x, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.atoms])

    @property
    def is_rational(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for a in self.atoms for v in a)


@dataclass(frozen=True)
class Semicircle:
    """Density ``sqrt((4 sigma^2 - x^2)_+) / (2 pi sigma^2)``."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Arcsine:
    """Density ``1 / (pi sqrt(a^2 - x^2))`` on ``(-a, a)``."""

    halfwidth: float = 2.0

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("halfwidth must be positive")


@dataclass(frozen=True)
class BernoulliStd:
    """Bernoulli(p) shifted and scaled to mean 0, variance 1."""

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")

    def as_atomic(self) -> Atomic:
        p = self.p
        hi = math.sqrt((1 - p) / p)
        lo = -math.sqrt(p / (1 - p))
        return Atomic(((lo, 1 - p), (hi, p)))


@dataclass(frozen=True, eq=False)
class GridDensity:
    xs: np.ndarray
    fs: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        fs = np.asarray(self.fs, dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2:
            raise ValueError("xs and fs must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if np.any(fs < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "fs", fs)

    @classmethod
    def checked(cls, xs, fs) -> "GridDensity":
        g = cls(xs, fs)
        if abs(g.mass - 1.0) > 1e-6:
            raise ValueError(f"grid density integrates to {g.mass}, not 1")
        return g

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.fs, self.xs))

    def quadrature_weights(self) -> np.ndarray:
        dx = np.diff(self.xs)
        w = np.zeros_like(self.xs)
        w[:-1] += dx / 2
        w[1:] += dx / 2
        return w * self.fs


MeasureSpec = Union[Atomic, Semicircle, Arcsine, BernoulliStd, GridDensity]


def rademacher() -> Atomic:
    return Atomic(((-1, Fraction(1, 2)), (1, Fraction(1, 2))))


def point_mass(x: Real = 0) -> Atomic:
    return Atomic(((x, 1),))


# ---------------------------------------------------------------------------
# moments


def moment(mu: MeasureSpec, k: int) -> float:
    """``int x^k dmu``; closed forms except for grids (trapezoid)."""
    if k <= 0:
        raise ValueError("moment order must be positive")
    if isinstance(mu, BernoulliStd):
        mu = mu.as_atomic()
    if isinstance(mu, Atomic):
        return float(np.sum(mu.weights * mu.positions**k))
    if isinstance(mu, Semicircle):
        return 0.0 if k % 2 else catalan(k // 2) * mu.sigma**k
    if isinstance(mu, Arcsine):
        return 0.0 if k % 2 else math.comb(k, k // 2) * (mu.halfwidth / 2) ** k
    if isinstance(mu, GridDensity):
        return float(np.trapezoid(mu.xs**k * mu.fs, mu.xs))
    raise TypeError(f"not a measure spec: {mu!r}")


def exact_moments(mu: MeasureSpec, K: int) -> tuple:
    """Moments 1..K as exact numbers where the law allows it.

    Rational atoms give :class:`Fraction`; the standardized Bernoulli and the
    closed-form laws give sympy numbers; float atoms are taken at their exact
    binary value.
    """
    import sympy

    if isinstance(mu, Atomic):
        if mu.is_rational:
            return tuple(
                sum(Fraction(w) * Fraction(x) ** k for x, w in mu.atoms)
                for k in range(1, K + 1)
            )
        atoms = [(Fraction(x), Fraction(w)) for x, w in mu.atoms]
        return tuple(sum(w * x**k for x, w in atoms) for k in range(1, K + 1))
    if isinstance(mu, BernoulliStd):
        p = sympy.nsimplify(mu.p)
        hi = sympy.sqrt((1 - p) / p)
        lo = -sympy.sqrt(p / (1 - p))
        return tuple(
            sympy.nsimplify(sympy.expand(p * hi**k + (1 - p) * lo**k))
            for k in range(1, K + 1)
        )
    if isinstance(mu, Semicircle):
        s = sympy.nsimplify(mu.sigma)
        return tuple(
            sympy.Integer(0) if k % 2 else catalan(k // 2) * s**k for k in range(1, K + 1)
        )
    if isinstance(mu, Arcsine):
        a = sympy.nsimplify(mu.halfwidth)
        return tuple(
            sympy.Integer(0) if k % 2 else math.comb(k, k // 2) * (a / 2) ** k
            for k in range(1, K + 1)
        )
    raise TypeError(f"no exact moments for {type(mu).__name__}")


def variance(mu: MeasureSpec) -> float:
    m1 = moment(mu, 1)
    return moment(mu, 2) - m1 * m1


def third_abs_moment(mu: MeasureSpec) -> float:
    if isinstance(mu, BernoulliStd):
        mu = mu.as_atomic()
    if isinstance(mu, Atomic):
        return float(np.sum(mu.weights * np.abs(mu.positions) ** 3))
    if isinstance(mu, Semicircle):
        return 64.0 / (15.0 * math.pi) * mu.sigma**3
    if isinstance(mu, Arcsine):
        return 4.0 * mu.halfwidth**3 / (3.0 * math.pi)
    if isinstance(mu, GridDensity):
        return float(np.trapezoid(np.abs(mu.xs) ** 3 * mu.fs, mu.xs))
    raise TypeError(f"not a measure spec: {mu!r}")


def support_radius(mu: MeasureSpec) -> float:
    if isinstance(mu, BernoulliStd):
        mu = mu.as_atomic()
    if isinstance(mu, Atomic):
        return float(np.max(np.abs(mu.positions)))
    if isinstance(mu, Semicircle):
        return 2.0 * mu.sigma
    if isinstance(mu, Arcsine):
        return mu.halfwidth
    return float(np.max(np.abs(mu.xs[mu.fs > 0]))) if np.any(mu.fs > 0) else 0.0


# ---------------------------------------------------------------------------
# affine maps


def _scale_value(x, lam):
    if isinstance(x, (int, Fraction)) and isinstance(lam, (int, Fraction)):
        return Fraction(x) * Fraction(lam)
    return float(x) * float(lam)


def dilate(mu: MeasureSpec, lam: Real) -> MeasureSpec:
    """Push-forward under ``x -> lam * x``."""
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    if lam == 1:
        return mu
    if isinstance(mu, BernoulliStd):
        mu = mu.as_atomic()
    if isinstance(mu, Atomic):
        return Atomic(tuple((_scale_value(x, lam), w) for x, w in mu.atoms))
    if isinstance(mu, Semicircle):
        return Semicircle(mu.sigma * float(lam))
    if isinstance(mu, Arcsine):
        return Arcsine(mu.halfwidth * float(lam))
    if isinstance(mu, GridDensity):
        return GridDensity(mu.xs * float(lam), mu.fs / float(lam))
    raise TypeError(f"not a measure spec: {mu!r}")


def standardize(mu: MeasureSpec) -> MeasureSpec:
    """Affine push-forward to mean 0 and variance 1."""
    if isinstance(mu, BernoulliStd):
        return mu
    var = variance(mu)
    if not (var > 0 and math.isfinite(var)):
        raise DegenerateMeasureError(f"variance {var} is not positive and finite")
    if isinstance(mu, Semicircle):
        return Semicircle(1.0)
    if isinstance(mu, Arcsine):
        return Arcsine(math.sqrt(2.0))
    if isinstance(mu, Atomic):
        if mu.is_rational:
            m1 = sum(Fraction(w) * Fraction(x) for x, w in mu.atoms)
            m2 = sum(Fraction(w) * Fraction(x) ** 2 for x, w in mu.atoms)
            v = m2 - m1 * m1
            if v == 1:
                return Atomic(tuple((Fraction(x) - m1, w) for x, w in mu.atoms))
        mean = moment(mu, 1)
        sd = math.sqrt(var)
        if mean == 0 and sd == 1:
            return mu
        return Atomic(tuple(((float(x) - mean) / sd, w) for x, w in mu.atoms))
    if isinstance(mu, GridDensity):
        mean = moment(mu, 1) / mu.mass
        sd = math.sqrt(moment(mu, 2) / mu.mass - mean**2)
        return GridDensity((mu.xs - mean) / sd, mu.fs * sd / mu.mass)
    raise TypeError(f"not a measure spec: {mu!r}")


# ---------------------------------------------------------------------------
# Q3 membership


@dataclass(frozen=True)
class Q3Certificate:
    mean: float
    variance: float
    third_abs_moment: float
    is_member: bool

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "third_abs_moment": self.third_abs_moment,
            "is_member": self.is_member,
        }


def q3_check(mu: MeasureSpec) -> Q3Certificate:
    """Centered, unit variance, finite third absolute moment.

    Every variant here is compactly supported, so finiteness of the third
    moment holds by construction; the value is still reported.
    """
    mean = moment(mu, 1)
    var = moment(mu, 2) - mean * mean
    third = third_abs_moment(mu)
    member = abs(mean) <= Q3_TOL and abs(var - 1.0) <= Q3_TOL and math.isfinite(third)
    return Q3Certificate(mean, var, third, bool(member))


# ---------------------------------------------------------------------------
# JSON


def _parse_real(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MeasureSchemaError(f"expected a number or rational string, got {v!r}")
    return v


def measure_from_json(doc) -> MeasureSpec:
    if not isinstance(doc, dict) or "type" not in doc:
        raise MeasureSchemaError("measure spec must be an object with a 'type' field")
    kind = doc["type"]
    try:
        if kind == "atomic":
            atoms = doc["atoms"]
            return Atomic(tuple((_parse_real(a[0]), _parse_real(a[1])) for a in atoms))
        if kind == "rademacher":
            return rademacher()
        if kind == "semicircle":
            return Semicircle(float(_parse_real(doc.get("sigma", 1.0))))
        if kind == "arcsine":
            return Arcsine(float(_parse_real(doc.get("halfwidth", 2.0))))
        if kind == "bernoulli_std":
            return BernoulliStd(float(_parse_real(doc["p"])))
        if kind == "grid":
            return GridDensity.checked(doc["xs"], doc["fs"])
    except MeasureSchemaError:
        raise
    except (KeyError, TypeError, IndexError, ValueError, ZeroDivisionError) as exc:
        raise MeasureSchemaError(f"invalid {kind!r} spec: {exc}") from exc
    raise MeasureSchemaError(f"unknown measure type {kind!r}")


def _json_real(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    return v


def measure_to_json(mu: MeasureSpec) -> dict:
    if isinstance(mu, Atomic):
        return {"type": "atomic", "atoms": [[_json_real(x), _json_real(w)] for x, w in mu.atoms]}
    if isinstance(mu, Semicircle):
        return {"type": "semicircle", "sigma": mu.sigma}
    if isinstance(mu, Arcsine):
        return {"type": "arcsine", "halfwidth": mu.halfwidth}
    if isinstance(mu, BernoulliStd):
        return {"type": "bernoulli_std", "p": mu.p}
    if isinstance(mu, GridDensity):
        return {"type": "grid", "xs": mu.xs.tolist(), "fs": mu.fs.tolist()}
    raise TypeError(f"not a measure spec: {mu!r}")
