"""Non-crossing partitions and the free moment-cumulant conversion.

All conversions are written against the ring operations only (``+``, ``-``,
``*``), so they stay exact for :class:`fractions.Fraction` and sympy numbers
and degrade gracefully to floats.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Sequence

MAX_ENUMERATION_ORDER = 14
# Above this order the block-type tables get slow to build; fall back to the
# recursion over the block containing 1.
AUTO_ENUMERATION_ORDER = 10


class EnumerationTooLarge(ValueError):
    """Requested enumeration exceeds :data:`MAX_ENUMERATION_ORDER`."""


@dataclass(frozen=True)
class SetPartition:
    """A set partition of ``{1..k}`` stored as sorted tuples of sorted blocks."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        if any(len(b) == 0 for b in blocks):
            raise ValueError("empty block")
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(1, len(flat) + 1)):
            raise ValueError(f"blocks do not partition 1..{len(flat)}: {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def block_type(self) -> tuple[int, ...]:
        return tuple(sorted(len(b) for b in self.blocks))

    def is_noncrossing(self) -> bool:
        return not has_crossing(self.blocks)


def has_crossing(blocks: Sequence[Sequence[int]]) -> bool:
    """True if some a<b<c<d has a,c in one block and b,d in another."""
    for i, first in enumerate(blocks):
        for j, second in enumerate(blocks):
            if i == j:
                continue
            for a in first:
                for c in first:
                    if c <= a:
                        continue
                    inside = any(a < b < c for b in second)
                    if inside and any(d > c for d in second):
                        return True
    return False


@lru_cache(maxsize=None)
def catalan(n: int) -> int:
    """Catalan numbers via ``C_{n+1} = sum_i C_i C_{n-i}``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1
    return sum(catalan(i) * catalan(n - 1 - i) for i in range(n))


def _nc_blocks(labels: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
    # The block containing labels[0] splits the rest into independent gaps.
    if not labels:
        yield []
        return
    first, rest = labels[0], labels[1:]
    m = len(rest)
    for r in range(m + 1):
        for chosen in combinations(range(m), r):
            block = (first,) + tuple(rest[i] for i in chosen)
            gaps = []
            prev = -1
            for i in chosen:
                gaps.append(rest[prev + 1:i])
                prev = i
            gaps.append(rest[prev + 1:])
            yield from _product_of_gaps(block, gaps)


def _product_of_gaps(block, gaps):
    if not gaps:
        yield [block]
        return
    head, tail = gaps[0], gaps[1:]
    for left in _nc_blocks(head):
        for right in _product_of_gaps(block, tail):
            yield left + right


def enumerate_nc(k: int) -> list[SetPartition]:
    """All non-crossing partitions of ``{1..k}``; there are ``catalan(k)``."""
    if k < 1:
        raise ValueError("k must be positive")
    if k > MAX_ENUMERATION_ORDER:
        raise EnumerationTooLarge(
            f"NC({k}) has {catalan(k)} elements; limit is k <= {MAX_ENUMERATION_ORDER}"
        )
    return [SetPartition(tuple(p)) for p in _nc_blocks(tuple(range(1, k + 1)))]


@lru_cache(maxsize=None)
def nc_block_types(k: int) -> dict[tuple[int, ...], int]:
    """Multiplicity of each block-size multiset among NC(k)."""
    if k > MAX_ENUMERATION_ORDER:
        raise EnumerationTooLarge(f"k={k} exceeds {MAX_ENUMERATION_ORDER}")
    counts = Counter(
        tuple(sorted(len(b) for b in p)) for p in _nc_blocks(tuple(range(1, k + 1)))
    )
    return dict(counts)


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True)
class _OrderedSequence:
    values: tuple

    def __post_init__(self):
        values = tuple(self.values)
        if len(values) < 1:
            raise ValueError("sequence needs at least order 1")
        object.__setattr__(self, "values", values)

    @property
    def order(self) -> int:
        return len(self.values)

    def at(self, k: int):
        """Entry of order ``k`` (1-indexed)."""
        if not 1 <= k <= len(self.values):
            raise IndexError(f"order {k} outside 1..{len(self.values)}")
        return self.values[k - 1]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def to_json(self) -> list[str]:
        return [format_exact(v) for v in self.values]

    @classmethod
    def from_json(cls, items: Sequence[str]):
        return cls(tuple(Fraction(s) for s in items))


class MomentSequence(_OrderedSequence):
    """Moments ``m_1..m_K``."""


class CumulantSequence(_OrderedSequence):
    """Free cumulants ``kappa_1..kappa_K``."""


def format_exact(value) -> str:
    """``"p/q"`` for rationals, a 17-significant-digit decimal otherwise."""
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}" if value.denominator != 1 else str(value.numerator)
    try:
        import sympy

        if isinstance(value, sympy.Basic):
            if value.is_Rational:
                return str(value)
            value = complex(value.evalf(30))
            if value.imag == 0:
                value = value.real
    except ImportError:  # pragma: no cover
        pass
    if isinstance(value, complex):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    return f"{float(value):.17g}"


def _as_values(seq) -> tuple:
    return tuple(seq.values) if isinstance(seq, _OrderedSequence) else tuple(seq)


def _zero_like(values):
    return values[0] * 0


def _series_power_coeffs(m_values, max_power: int, length: int):
    """Coefficients ``[z^j] M(z)^s`` for s = 0..max_power, j < length,
    where ``M(z) = 1 + sum_j m_j z^j``."""
    zero = _zero_like(m_values)
    one = zero + 1
    base = [one] + list(m_values[: length - 1])
    base += [zero] * (length - len(base))
    powers = [[one] + [zero] * (length - 1)]
    for _ in range(max_power):
        prev = powers[-1]
        nxt = [zero] * length
        for i, pi in enumerate(prev):
            if pi == 0:
                continue
            for j in range(length - i):
                nxt[i + j] = nxt[i + j] + pi * base[j]
        powers.append(nxt)
    return powers


def _moments_recursive(kappa: tuple) -> tuple:
    K = len(kappa)
    zero = _zero_like(kappa)
    m: list = []
    for n in range(1, K + 1):
        # the block containing 1 has size s; the s gaps carry free moments
        powers = _series_power_coeffs(tuple(m) + (zero,) * (K - len(m)), n, n)
        total = zero
        for s in range(1, n + 1):
            total = total + kappa[s - 1] * powers[s][n - s]
        m.append(total)
    return tuple(m)


def _cumulants_recursive(m: tuple) -> tuple:
    K = len(m)
    zero = _zero_like(m)
    kappa: list = []
    for n in range(1, K + 1):
        powers = _series_power_coeffs(m, n, n)
        rest = zero
        for s in range(1, n):
            rest = rest + kappa[s - 1] * powers[s][n - s]
        kappa.append(m[n - 1] - rest)
    return tuple(kappa)


def _type_product(kappa, block_type):
    out = kappa[0] * 0 + 1
    for size in block_type:
        out = out * kappa[size - 1]
    return out


def _moments_enumerated(kappa: tuple) -> tuple:
    zero = _zero_like(kappa)
    m = []
    for k in range(1, len(kappa) + 1):
        total = zero
        for block_type, count in nc_block_types(k).items():
            total = total + count * _type_product(kappa, block_type)
        m.append(total)
    return tuple(m)


def _cumulants_enumerated(m: tuple) -> tuple:
    zero = _zero_like(m)
    kappa: list = []
    for k in range(1, len(m) + 1):
        partial = tuple(kappa) + (zero,)
        rest = zero
        for block_type, count in nc_block_types(k).items():
            if block_type == (k,):
                continue
            rest = rest + count * _type_product(partial, block_type)
        kappa.append(m[k - 1] - rest)
    return tuple(kappa)


def _pick_method(method: str, K: int) -> str:
    if method == "auto":
        return "enumerate" if K <= AUTO_ENUMERATION_ORDER else "recursive"
    if method not in ("enumerate", "recursive"):
        raise ValueError(f"unknown method {method!r}")
    if method == "enumerate" and K > MAX_ENUMERATION_ORDER:
        raise EnumerationTooLarge(f"order {K} exceeds {MAX_ENUMERATION_ORDER}")
    return method


def moments_from_cumulants(kappa, method: str = "auto") -> MomentSequence:
    """``m_k = sum over NC(k) of prod_B kappa_|B|``.

    ``method`` selects summation over enumerated partitions (grouped by block
    type) or the recursion on the block containing 1; both are exact.
    """
    values = _as_values(kappa)
    if not values:
        raise ValueError("empty cumulant sequence")
    if _pick_method(method, len(values)) == "enumerate":
        return MomentSequence(_moments_enumerated(values))
    return MomentSequence(_moments_recursive(values))


def cumulants_from_moments(m, method: str = "auto") -> CumulantSequence:
    """Inverse of :func:`moments_from_cumulants`, solved order by order."""
    values = _as_values(m)
    if not values:
        raise ValueError("empty moment sequence")
    if _pick_method(method, len(values)) == "enumerate":
        return CumulantSequence(_cumulants_enumerated(values))
    return CumulantSequence(_cumulants_recursive(values))
