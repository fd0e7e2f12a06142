"""Free additive convolution and the renormalization map ``T``.

``T`` sends the law of ``a`` to the law of ``(a + a') / sqrt(2)`` with ``a'``
a free copy of ``a``. An :class:`RGIterate` carries ``T^n mu`` as exact free
cumulants, as an evaluable R-transform, and optionally as a density grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

import numpy as np
import sympy

from .measures import (
    Atomic,
    BernoulliStd,
    GridDensity,
    MeasureSpec,
    exact_moments,
    q3_check,
)
from .nc_calculus import CumulantSequence, cumulants_from_moments
from .transforms import (
    TransformError,
    TransformHandle,
    _cauchy_prime_raw,
    _cauchy_raw,
    as_handle,
    r_transform,
    stieltjes_from_cauchy,
)

DEFAULT_ORDER = 8
SUBORDINATION_TOL = 1e-12
SUBORDINATION_MAX_ITER = 10_000


class NotInQ3Error(ValueError):
    """Seed law is not centered with unit variance."""

    def __init__(self, certificate):
        super().__init__(f"seed is not in Q3: {certificate}")
        self.certificate = certificate


class SubordinationError(TransformError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class NoDensityError(ValueError):
    """An atomic law has no density to invert."""


def _to_sympy(v):
    if isinstance(v, Fraction):
        return sympy.Rational(v.numerator, v.denominator)
    return sympy.sympify(v)


def conv_cumulants(a, b) -> CumulantSequence:
    """Free cumulants of ``mu_a [+] mu_b``: R-transforms add."""
    av = a.values if isinstance(a, CumulantSequence) else tuple(a)
    bv = b.values if isinstance(b, CumulantSequence) else tuple(b)
    if len(av) != len(bv):
        raise ValueError(f"order mismatch: {len(av)} vs {len(bv)}")
    return CumulantSequence(tuple(x + y for x, y in zip(av, bv)))


def t_scale_factor(k: int, steps: int = 1):
    """Exact ``2^{steps (1 - k/2)}``: the factor ``T^steps`` puts on ``kappa_k``."""
    return sympy.Integer(2) ** sympy.Rational(steps * (2 - k), 2)


def seed_cumulants(seed: MeasureSpec, order: int = DEFAULT_ORDER) -> CumulantSequence:
    moments = tuple(_to_sympy(m) for m in exact_moments(seed, order))
    kappa = cumulants_from_moments(moments)
    return CumulantSequence(tuple(sympy.nsimplify(sympy.expand(k)) for k in kappa))


@dataclass(frozen=True)
class RGIterate:
    n: int
    seed: MeasureSpec
    cumulants: CumulantSequence
    density: Optional[GridDensity] = None

    @classmethod
    def start(cls, seed: MeasureSpec, order: int = DEFAULT_ORDER) -> "RGIterate":
        cert = q3_check(seed)
        if not cert.is_member:
            raise NotInQ3Error(cert)
        return cls(0, seed, seed_cumulants(seed, order))

    @property
    def scale(self) -> float:
        """``2^{-n/2}``: T^n mu is the law of this times a sum of 2^n free copies."""
        return 2.0 ** (-self.n / 2)

    def r_eval(self, z, handle: Optional[TransformHandle] = None):
        return r_eval_iterate(self, z, handle)

    def summary(self) -> dict:
        from .measures import measure_to_json

        kappa = self.cumulants.values
        return {
            "n": self.n,
            "seed": measure_to_json(self.seed),
            "cumulants": self.cumulants.to_json(),
            "q3": {
                "mean": float(kappa[0]),
                "variance": float(kappa[1]) if len(kappa) > 1 else None,
                "is_member": bool(kappa[0] == 0 and len(kappa) > 1 and kappa[1] == 1),
            },
        }


def renormalize_T(it: RGIterate) -> RGIterate:
    """One application of T: ``kappa_k -> 2^{1 - k/2} kappa_k``."""
    kappa = it.cumulants.values
    if kappa[0] != 0 or len(kappa) < 2 or kappa[1] != 1:
        raise NotInQ3Error({"kappa_1": kappa[0], "kappa_2": kappa[1] if len(kappa) > 1 else None})
    scaled = tuple(t_scale_factor(k) * c for k, c in enumerate(kappa, start=1))
    return replace(it, n=it.n + 1, cumulants=CumulantSequence(scaled), density=None)


def iterate_T(seed: MeasureSpec, n: int, order: int = DEFAULT_ORDER) -> RGIterate:
    it = RGIterate.start(seed, order)
    for _ in range(n):
        it = renormalize_T(it)
    return it


def _seed_handle(it: RGIterate, handle: Optional[TransformHandle]) -> TransformHandle:
    if handle is None:
        return TransformHandle(it.seed)
    return replace(handle, source=it.seed)


def r_eval_iterate(it: RGIterate, z, handle: Optional[TransformHandle] = None):
    """``R_{T^n mu}(z) = 2^{n/2} R_mu(2^{-n/2} z)``."""
    h = _seed_handle(it, handle)
    s = it.scale
    return np.asarray(r_transform(h, s * np.asarray(z)))[()] / s


def clt_scale_r(h, n: int, z):
    """R of ``n^{-1/2}(a_1 + ... + a_n)`` for free copies: ``sqrt(n) R(z / sqrt(n))``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    h = as_handle(h)
    root = math.sqrt(n)
    return root * np.asarray(r_transform(h, np.asarray(z) / root))[()]


# ---------------------------------------------------------------------------
# measure level


@dataclass(frozen=True)
class SubordinationState:
    z: complex
    omega: complex
    residual: float
    iterations: int


def _subordinate(mu: MeasureSpec, t: float, z, tol=SUBORDINATION_TOL, max_iter=SUBORDINATION_MAX_ITER):
    """Solve ``omega = z + (t - 1)(F(omega) - omega)`` for the ``t``-th free
    convolution power; ``G_{mu^{[+]t}}(z) = G_mu(omega(z))``.

    The self-map is iterated from ``omega = z``. Where a Newton step on
    ``t omega - (t - 1) F(omega) - z`` lands in ``Im omega >= Im z`` and
    lowers the residual it replaces the plain step.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if np.any(z.imag <= 0):
        raise ValueError("subordination needs Im z > 0")
    if t == 1:
        return z.copy(), np.zeros(z.size), np.zeros(z.size, dtype=int)

    def F(w):
        return 1.0 / _cauchy_raw(mu, w)

    def psi(w, zz):
        return t * w - (t - 1) * F(w) - zz

    omega = z.copy()
    iters = np.zeros(z.size, dtype=int)
    active = np.ones(z.size, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        w, zz = omega[idx], z[idx]
        g = _cauchy_raw(mu, w)
        Fw = 1.0 / g
        r = t * w - (t - 1) * Fw - zz
        plain = zz + (t - 1) * (Fw - w)
        dF = -_cauchy_prime_raw(mu, w) / g**2
        with np.errstate(all="ignore"):
            newton = w - r / (t - (t - 1) * dF)
            ok = np.isfinite(newton) & (newton.imag >= zz.imag)
            rn = np.where(ok, np.abs(psi(np.where(ok, newton, w), zz)), np.inf)
        take = ok & (rn < np.abs(r))
        nxt = np.where(take, newton, plain)
        iters[idx] += 1
        moved = np.abs(nxt - w)
        omega[idx] = nxt
        active[idx] = moved > tol * (1 + np.abs(w))
    residual = np.abs(psi(omega, z))
    if active.any():
        raise SubordinationError(
            f"subordination did not converge in {max_iter} iterations",
            float(np.max(residual[active])),
        )
    return omega, residual, iters


def subordination_power(h, t: float, z):
    """``G`` of the ``t``-fold free convolution power at ``z`` (``Im z > 0``)."""
    h = as_handle(h)
    omega, _, _ = _subordinate(h.source, t, z)
    g = _cauchy_raw(h.source, omega)
    return complex(g[0]) if np.ndim(z) == 0 else g.reshape(np.shape(z))


def subordination_selfconv(h, z):
    """``G_{mu [+] mu}(z)`` through ``omega = z + F(omega) - omega``."""
    return subordination_power(h, 2, z)


def subordination_state(h, z: complex, t: float = 2) -> SubordinationState:
    h = as_handle(h)
    omega, residual, iters = _subordinate(h.source, t, z)
    return SubordinationState(complex(z), complex(omega[0]), float(residual[0]), int(iters[0]))


def iterate_cauchy(it: RGIterate):
    """Evaluator of ``G_{T^n mu}`` on the upper half-plane.

    ``T^n mu`` is the dilation by ``2^{-n/2}`` of the ``2^n``-th free
    convolution power, so one subordination solve per point suffices.
    """
    lam = it.scale
    t = 2.0**it.n
    mu = it.seed

    def G(z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        conj = flat.imag < 0
        zz = np.where(conj, np.conj(flat), flat) / lam
        omega, _, _ = _subordinate(mu, t, zz)
        g = _cauchy_raw(mu, omega) / lam
        g = np.where(conj, np.conj(g), g)
        return g.reshape(z.shape)

    return G


def measure_of_T(it: RGIterate, xs, eps_schedule=(1e-2, 1e-3)) -> GridDensity:
    """Density of ``T^n mu`` on ``xs`` by subordination plus Stieltjes inversion."""
    if it.n == 0 and isinstance(it.seed, (Atomic, BernoulliStd)):
        raise NoDensityError("atomic seed has no density at n = 0")
    return stieltjes_from_cauchy(iterate_cauchy(it), xs, eps_schedule)
