"""Cauchy, F and R transforms, and Stieltjes inversion.

The R-transform is evaluated on the lower imaginary axis ``z = -iy`` by
default, where ``F^{-1}(1/z)`` is taken in the upper half-plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .measures import (
    Arcsine,
    Atomic,
    BernoulliStd,
    GridDensity,
    MeasureSpec,
    Semicircle,
    dilate,
)

GAUSS_NODES = 96
MAX_HALVINGS = 8


class TransformError(ArithmeticError):
    """Base class for transform evaluation failures."""


class InversionFailure(TransformError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class BranchEscape(TransformError):
    """A Newton iterate left the working half-plane."""


@dataclass(frozen=True)
class TransformHandle:
    source: MeasureSpec
    newton_tol: float = 1e-12
    newton_max_iter: int = 100
    eval_axis_sign: str = "lower"

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.eval_axis_sign not in ("lower", "upper"):
            raise ValueError("eval_axis_sign must be 'lower' or 'upper'")

    def axis_point(self, y):
        """Working-axis point for ``y > 0``: ``-iy`` (lower) or ``iy`` (upper)."""
        y = np.asarray(y, dtype=float)
        sign = -1.0 if self.eval_axis_sign == "lower" else 1.0
        return sign * 1j * y

    def dilated(self, lam: float) -> "TransformHandle":
        return replace(self, source=dilate(self.source, lam))


@dataclass(frozen=True)
class EvalPoint:
    z: complex
    regime: str = "imaginary_axis"

    def __post_init__(self):
        if self.regime not in ("imaginary_axis", "upper_half_plane"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "imaginary_axis":
            if self.z.real != 0 or not 0 < abs(self.z.imag) <= 0.25:
                raise ValueError("imaginary-axis points need Re z = 0, 0 < |Im z| <= 1/4")
        elif not self.z.imag > 0:
            raise ValueError("upper-half-plane points need Im z > 0")


def as_handle(h) -> TransformHandle:
    return h if isinstance(h, TransformHandle) else TransformHandle(h)


# ---------------------------------------------------------------------------
# Cauchy transform


def _sqrt_cut(z, a):
    # sqrt(z - a) sqrt(z + a): analytic off [-a, a] and ~ z at infinity
    return np.sqrt(z - a) * np.sqrt(z + a)


def _check_off_axis(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag == 0):
        raise ValueError("Cauchy transform is only evaluated off the real axis")
    return z


def _atoms(mu):
    if isinstance(mu, BernoulliStd):
        mu = mu.as_atomic()
    return mu.positions, mu.weights


def _cauchy_raw(mu: MeasureSpec, z):
    if isinstance(mu, (Atomic, BernoulliStd)):
        x, w = _atoms(mu)
        return np.sum(w / (z[..., None] - x), axis=-1)
    if isinstance(mu, Semicircle):
        # (z - s) / (2 sigma^2) rewritten as 2 / (z + s): no cancellation at large |z|
        return 2.0 / (z + _sqrt_cut(z, 2 * mu.sigma))
    if isinstance(mu, Arcsine):
        return 1.0 / _sqrt_cut(z, mu.halfwidth)
    if isinstance(mu, GridDensity):
        w = mu.quadrature_weights()
        return np.sum(w / (z[..., None] - mu.xs), axis=-1)
    raise TypeError(f"not a measure spec: {mu!r}")


def _cauchy_prime_raw(mu: MeasureSpec, z):
    if isinstance(mu, (Atomic, BernoulliStd)):
        x, w = _atoms(mu)
        return -np.sum(w / (z[..., None] - x) ** 2, axis=-1)
    if isinstance(mu, Semicircle):
        s = _sqrt_cut(z, 2 * mu.sigma)
        return -2.0 / (s * (z + s))
    if isinstance(mu, Arcsine):
        return -z / _sqrt_cut(z, mu.halfwidth) ** 3
    if isinstance(mu, GridDensity):
        w = mu.quadrature_weights()
        return -np.sum(w / (z[..., None] - mu.xs) ** 2, axis=-1)
    raise TypeError(f"not a measure spec: {mu!r}")


def _unwrap(z_in, out):
    return complex(out) if np.ndim(z_in) == 0 else out


def cauchy(h, z):
    """``G(z) = int dmu(t) / (z - t)`` for ``Im z != 0``."""
    h = as_handle(h)
    zz = _check_off_axis(z)
    return _unwrap(z, _cauchy_raw(h.source, zz))


def cauchy_derivative(h, z):
    """``G'(z) = -int dmu(t) / (z - t)^2``."""
    h = as_handle(h)
    zz = _check_off_axis(z)
    return _unwrap(z, _cauchy_prime_raw(h.source, zz))


def f_transform(h, z):
    """``F = 1/G``."""
    g = np.asarray(cauchy(h, z), dtype=complex)
    if np.any(np.abs(g) < 1e-300):
        raise TransformError("Cauchy transform vanishes numerically; F undefined")
    return _unwrap(z, 1.0 / g)


# ---------------------------------------------------------------------------
# Newton machinery


def _damped_newton(res, der, x0, scale, tol, max_iter, in_domain, what):
    """Vectorised damped Newton.

    ``res(x, idx)`` and ``der(x, idx)`` receive the active entries together
    with their positions in ``x0``. Steps are halved (at most
    ``MAX_HALVINGS`` times) while the residual fails to decrease; each entry
    takes one extra polishing step after meeting ``tol * scale``.
    """
    x = np.array(x0, dtype=complex, copy=True)
    n = x.size
    r = res(x, np.arange(n))
    done = np.abs(r) <= tol * scale
    polished = np.zeros(n, dtype=bool)
    for _ in range(max_iter + 1):
        idx = np.flatnonzero(~(done & polished))
        if idx.size == 0:
            break
        xa, ra = x[idx], r[idx]
        step = ra / der(xa, idx)
        new = xa - step
        rn = res(new, idx)
        worse = ~(np.abs(rn) <= np.abs(ra)) & ~done[idx]
        for _ in range(MAX_HALVINGS):
            if not worse.any():
                break
            step[worse] /= 2
            new[worse] = xa[worse] - step[worse]
            rn[worse] = res(new[worse], idx[worse])
            worse &= ~(np.abs(rn) <= np.abs(ra))
        # a polishing step that does not help is dropped
        keep = ~(done[idx] & ~(np.abs(rn) <= np.abs(ra)))
        new = np.where(keep, new, xa)
        rn = np.where(keep, rn, ra)
        if not np.all(in_domain(new, idx)):
            raise BranchEscape(f"{what}: Newton iterate left the working half-plane")
        polished[idx] |= done[idx]
        x[idx], r[idx] = new, rn
        done = np.abs(r) <= tol * scale
    if not done.all():
        raise InversionFailure(
            f"{what}: no convergence in {max_iter} iterations",
            float(np.max(np.abs(r[~done]))),
        )
    return x


def f_inverse(h, w):
    """Solve ``F(u) = w`` by damped Newton from ``u0 = w``.

    The iterate must stay in the half-plane containing ``w``. On return
    ``|F(u) - w| <= newton_tol * max(1, |w|)`` holds at every point.
    """
    h = as_handle(h)
    mu = h.source
    ww = np.atleast_1d(np.asarray(w, dtype=complex)).ravel()
    if np.any(ww.imag == 0):
        raise ValueError("f_inverse needs Im w != 0")
    sign = np.sign(ww.imag)

    def res(u, idx):
        return 1.0 / _cauchy_raw(mu, u) - ww[idx]

    def der(u, idx):
        return -_cauchy_prime_raw(mu, u) / _cauchy_raw(mu, u) ** 2

    u = _damped_newton(
        res, der, ww, np.maximum(1.0, np.abs(ww)), h.newton_tol, h.newton_max_iter,
        lambda u, idx: np.sign(u.imag) == sign[idx], "f_inverse",
    )
    return complex(u[0]) if np.ndim(w) == 0 else u.reshape(np.shape(w))


# ---------------------------------------------------------------------------
# R-transform


def quadrature_rule(mu: MeasureSpec, n_nodes: int = GAUSS_NODES):
    """Nodes and weights integrating against ``mu``.

    Atoms are exact; semicircle and arcsine use Gauss-Chebyshev rules of the
    second and first kind (nodes mirrored so odd moments vanish exactly);
    grids use trapezoid weights renormalised to mass 1.
    """
    if isinstance(mu, (Atomic, BernoulliStd)):
        return _atoms(mu)
    if isinstance(mu, Semicircle):
        k = np.arange(1, n_nodes + 1)
        theta = k * math.pi / (n_nodes + 1)
        nodes, weights = 2 * mu.sigma * np.cos(theta), 2.0 / (n_nodes + 1) * np.sin(theta) ** 2
    elif isinstance(mu, Arcsine):
        k = np.arange(1, n_nodes + 1)
        nodes = mu.halfwidth * np.cos((2 * k - 1) * math.pi / (2 * n_nodes))
        weights = np.full(n_nodes, 1.0 / n_nodes)
    elif isinstance(mu, GridDensity):
        w = mu.quadrature_weights()
        return mu.xs, w / w.sum()
    else:
        raise TypeError(f"not a measure spec: {mu!r}")
    nodes = (nodes - nodes[::-1]) / 2
    weights = (weights + weights[::-1]) / 2
    return nodes, weights / math.fsum(weights)


def _mean_var(mu: MeasureSpec, t, wt):
    if isinstance(mu, Semicircle):
        return 0.0, mu.sigma**2
    if isinstance(mu, Arcsine):
        return 0.0, mu.halfwidth**2 / 2
    mean = math.fsum(wt * t)
    return mean, math.fsum(wt * (t - mean) ** 2)


def r_transform(h, z):
    """``R(z) = F^{-1}(1/z) - 1/z``, the branch with ``R(z) -> mean`` as ``z -> 0``.

    ``G(1/z + R) = z`` is solved for the remainder ``p`` in
    ``R = mean + var z + z^2 p``. With ``c = mean - t`` and
    ``d = c + z (var + z p)`` the equation reads

        p - z (var + z p)^2 + int d^3 / (1 + z d) dmu(t) = 0,

    whose terms are all O(1); nothing of size ``1/|z|`` is ever subtracted.
    """
    h = as_handle(h)
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if np.any(zz == 0):
        raise ValueError("R-transform is evaluated at z != 0")
    if np.any(zz.imag == 0):
        raise ValueError("R-transform is evaluated off the real axis")
    t, wt = quadrature_rule(h.source)
    mean, var = _mean_var(h.source, t, wt)
    c = mean - t
    scale = 1.0 + float(np.sum(wt * np.abs(c) ** 3))

    def parts(p, idx):
        zc = zz[idx, None]
        q = var + zc[:, 0] * p
        d = c + zc * q[:, None]
        return zc, q, d, 1 + zc * d

    def res(p, idx):
        zc, q, d, den = parts(p, idx)
        return p - zc[:, 0] * q**2 + np.sum(wt * d**3 / den, axis=-1)

    def der(p, idx):
        zc, q, d, den = parts(p, idx)
        z2 = zc[:, 0] ** 2
        return 1 - 2 * z2 * q + z2 * np.sum(wt * (3 * d**2 + 2 * zc * d**3) / den**2, axis=-1)

    wsign = np.sign((1 / zz).imag)

    def in_domain(p, idx):
        zi = zz[idx]
        return np.sign((1 / zi + mean + var * zi + zi**2 * p).imag) == wsign[idx]

    p0 = np.full(zz.size, -float(np.sum(wt * c**3)), dtype=complex)
    p = _damped_newton(res, der, p0, scale, h.newton_tol, h.newton_max_iter, in_domain, "r_transform")
    v = mean + var * zz + zz**2 * p
    return complex(v[0]) if np.ndim(z) == 0 else v.reshape(np.shape(z))


def r_on_axis(h, y):
    """R at the working-axis points for ``y > 0``."""
    h = as_handle(h)
    return r_transform(h, h.axis_point(y))


def r_of_dilated(h, lam: float, z):
    """R of the law of ``lam * a`` from R of ``a``: ``lam R(lam z)``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    return lam * np.asarray(r_transform(h, lam * np.asarray(z)))[()]


# ---------------------------------------------------------------------------
# Stieltjes inversion


def stieltjes_from_cauchy(G: Callable, xs, eps_schedule) -> GridDensity:
    """Density ``-Im G(x + i eps) / pi`` extrapolated linearly to ``eps = 0``.

    Negative extrapolated values are clamped to zero. The result is not
    renormalised.
    """
    e1, e2 = (float(e) for e in eps_schedule)
    if not e1 > e2 > 0:
        raise ValueError("eps schedule must satisfy eps1 > eps2 > 0")
    xs = np.asarray(xs, dtype=float)
    f1 = -np.asarray(G(xs + 1j * e1)).imag / math.pi
    f2 = -np.asarray(G(xs + 1j * e2)).imag / math.pi
    f0 = (e1 * f2 - e2 * f1) / (e1 - e2)
    return GridDensity(xs, np.clip(f0, 0.0, None))


def stieltjes_density(h, xs, eps_schedule=(1e-2, 1e-3)) -> GridDensity:
    h = as_handle(h)
    return stieltjes_from_cauchy(lambda z: _cauchy_raw(h.source, z), xs, eps_schedule)
