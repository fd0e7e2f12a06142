"""Independent reference computations used as test oracles.

Nothing here imports the package under test.
"""
import cmath
import math
from fractions import Fraction

import mpmath


def set_partitions(k):
    """All set partitions of {1..k} via restricted growth strings."""
    def rgs(prefix, m):
        if len(prefix) == k:
            yield prefix
            return
        for v in range(m + 2):
            yield from rgs(prefix + [v], max(m, v))

    if k == 0:
        yield []
        return
    for s in rgs([0], 0):
        blocks = {}
        for i, b in enumerate(s, start=1):
            blocks.setdefault(b, []).append(i)
        yield [tuple(b) for b in blocks.values()]


def crossing(partition):
    label = {i: j for j, b in enumerate(partition) for i in b}
    n = len(label)
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            for c in range(b + 1, n + 1):
                for d in range(c + 1, n + 1):
                    if label[a] == label[c] and label[b] == label[d] and label[a] != label[b]:
                        return True
    return False


def noncrossing_partitions(k):
    return [p for p in set_partitions(k) if not crossing(p)]


def brute_moments(kappa):
    """m_k = sum over brute-force NC(k) of product of kappa_|B|."""
    out = []
    for k in range(1, len(kappa) + 1):
        total = Fraction(0)
        for p in noncrossing_partitions(k):
            term = Fraction(1)
            for b in p:
                term *= kappa[len(b) - 1]
            total += term
        out.append(total)
    return out


def catalan_closed(n):
    return math.comb(2 * n, n) // (n + 1)


def kreweras_count(block_sizes):
    """Number of NC partitions of n with the given block-size multiset."""
    n = sum(block_sizes)
    b = len(block_sizes)
    mult = {}
    for s in block_sizes:
        mult[s] = mult.get(s, 0) + 1
    denom = math.factorial(n - b + 1)
    for r in mult.values():
        denom *= math.factorial(r)
    return math.factorial(n) // denom


def rademacher_r(z):
    """R of (delta_{-1} + delta_1)/2, branch with R(z) ~ z at 0."""
    return (-1 + cmath.sqrt(1 + 4 * z * z)) / (2 * z)


def rademacher_f_inverse(w):
    """Root of (u^2 - 1)/u = w in the half-plane of w."""
    r1 = (w + cmath.sqrt(w * w + 4)) / 2
    r2 = (w - cmath.sqrt(w * w + 4)) / 2
    return r1 if (r1.imag > 0) == (w.imag > 0) else r2


def semicircle_density(x, sigma=1.0):
    return math.sqrt(max(4 * sigma**2 - x * x, 0.0)) / (2 * math.pi * sigma**2)


def semicircle_cauchy(z, sigma=1.0):
    z = complex(z)
    s = cmath.sqrt(z - 2 * sigma) * cmath.sqrt(z + 2 * sigma)
    return (z - s) / (2 * sigma**2)


def arcsine_cauchy(z, a=2.0):
    z = complex(z)
    return 1 / (cmath.sqrt(z - a) * cmath.sqrt(z + a))


def rademacher_distance_closed(n=0, samples=20000, dps=30):
    """Dense-sample sup over (0, 1/4] of |2^{n/2} R_rad(2^{-n/2}(-iy)) + iy| / y^2."""
    mpmath.mp.dps = dps
    s = mpmath.sqrt(2) ** n

    def res(y):
        z = -1j * y
        r = s * (-1 + mpmath.sqrt(1 + 4 * (z / s) ** 2)) / (2 * z / s)
        return abs(r - z) / y**2

    best = max(res(mpmath.mpf(k) / (4 * samples)) for k in range(1, samples + 1))
    return float(best)
