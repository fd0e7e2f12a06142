from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from freerg.nc_calculus import (
    CumulantSequence,
    EnumerationTooLarge,
    MomentSequence,
    SetPartition,
    catalan,
    cumulants_from_moments,
    enumerate_nc,
    has_crossing,
    moments_from_cumulants,
    nc_block_types,
)
from oracles import brute_moments, catalan_closed, kreweras_count, noncrossing_partitions, set_partitions


def _canon(p):
    return tuple(sorted(tuple(sorted(b)) for b in p))


def test_enumerate_k1():
    assert enumerate_nc(1) == [SetPartition(((1,),))]


@pytest.mark.parametrize("k", range(1, 8))
def test_enumeration_matches_brute_force(k):
    ours = {p.blocks for p in enumerate_nc(k)}
    brute = {_canon(p) for p in noncrossing_partitions(k)}
    assert ours == brute
    assert len(ours) == len(enumerate_nc(k))


def test_k3_all_partitions_noncrossing():
    assert len(enumerate_nc(3)) == 5 == len(list(set_partitions(3)))


def test_k4_excludes_the_crossing_pair():
    parts = {p.blocks for p in enumerate_nc(4)}
    assert len(parts) == 14
    assert ((1, 3), (2, 4)) not in parts


@pytest.mark.parametrize("k", range(1, 11))
def test_count_is_catalan(k):
    assert len(enumerate_nc(k)) == catalan(k) == catalan_closed(k)


def test_every_partition_is_noncrossing():
    for k in range(1, 9):
        for p in enumerate_nc(k):
            assert not has_crossing(p.blocks)
            assert p.is_noncrossing()


def test_crossing_detector():
    assert has_crossing(((1, 3), (2, 4)))
    assert not has_crossing(((1, 4), (2, 3)))
    assert has_crossing(((2, 4), (1, 3)))


def test_size_guard():
    with pytest.raises(EnumerationTooLarge):
        enumerate_nc(15)


def test_set_partition_validation():
    with pytest.raises(ValueError):
        SetPartition(((1, 2), (2, 3)))
    with pytest.raises(ValueError):
        SetPartition(((1,), (3,)))


@pytest.mark.parametrize("n,value", [(0, 1), (3, 5), (4, 14)])
def test_catalan_values(n, value):
    assert catalan(n) == value


@pytest.mark.parametrize("k", range(2, 10))
def test_block_types_match_kreweras(k):
    for block_type, count in nc_block_types(k).items():
        assert count == kreweras_count(block_type)


# --- conversions ---------------------------------------------------------

F = Fraction


@pytest.mark.parametrize("method", ["auto", "enumerate", "recursive"])
def test_semicircle_moments_are_catalan(method):
    m = moments_from_cumulants([0, 1, 0, 0, 0, 0], method=method)
    assert m.values == (0, 1, 0, 2, 0, 5)


def test_semicircle_even_moments_long():
    K = 16
    m = moments_from_cumulants([F(int(n == 2)) for n in range(1, K + 1)])
    for k in range(1, K // 2 + 1):
        assert m.at(2 * k) == catalan(k)
        assert m.at(2 * k - 1) == 0


def test_zero_cumulants_zero_moments():
    assert moments_from_cumulants([F(0)] * 6).values == (0,) * 6


def test_rademacher_moments():
    kappa = [F(v) for v in (0, 1, 0, -1, 0, 2)]
    assert list(moments_from_cumulants(kappa).values) == brute_moments(kappa) == [0, 1, 0, 1, 0, 1]


def test_cumulants_examples():
    assert cumulants_from_moments([0, 1, 0, 2, 0, 5]).values == (0, 1, 0, 0, 0, 0)
    assert cumulants_from_moments([0, 1, 0, 1, 0, 1]).values == (0, 1, 0, -1, 0, 2)


def test_dilated_semicircle_cumulants():
    s2 = F(9, 4)
    m = [0, s2, 0, 2 * s2**2, 0, 5 * s2**3, 0, 14 * s2**4]
    kappa = cumulants_from_moments(m)
    assert kappa.values == (0, s2, 0, 0, 0, 0, 0, 0)
    assert moments_from_cumulants(kappa).values == tuple(m)


def test_methods_agree_against_brute_force():
    kappa = [F(1, 3), F(-2, 5), F(7, 2), F(1), F(-3, 7), F(2)]
    expected = brute_moments(kappa)
    assert list(moments_from_cumulants(kappa, method="enumerate").values) == expected
    assert list(moments_from_cumulants(kappa, method="recursive").values) == expected


def test_beyond_enumeration_limit_uses_recursion():
    kappa = [F(int(n == 2)) for n in range(1, 21)]
    assert moments_from_cumulants(kappa).at(20) == catalan(10)
    with pytest.raises(EnumerationTooLarge):
        moments_from_cumulants(kappa, method="enumerate")


def test_sequence_json_roundtrip():
    seq = CumulantSequence((F(0), F(1), F(-3, 7)))
    assert seq.to_json() == ["0", "1", "-3/7"]
    assert CumulantSequence.from_json(seq.to_json()) == seq
    assert MomentSequence((F(1, 2),)).at(1) == F(1, 2)
    with pytest.raises(ValueError):
        MomentSequence(())


rationals = st.fractions(min_value=-5, max_value=5, max_denominator=12)


@settings(max_examples=100, deadline=None)
@given(st.lists(rationals, min_size=12, max_size=12))
def test_roundtrip_order_12(kappa):
    assert cumulants_from_moments(moments_from_cumulants(kappa)).values == tuple(kappa)


@settings(max_examples=30, deadline=None)
@given(st.lists(rationals, min_size=1, max_size=9))
def test_enumerate_and_recursive_agree(kappa):
    a = moments_from_cumulants(kappa, method="enumerate")
    b = moments_from_cumulants(kappa, method="recursive")
    assert a == b
    assert cumulants_from_moments(a, method="recursive") == cumulants_from_moments(a, method="enumerate")
