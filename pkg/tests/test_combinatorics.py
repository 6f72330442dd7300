import math
from itertools import combinations, product

import pytest

from bpve.combinatorics import MAX_LEMSA_ORDER, composition_count, compositions, identity_l2, lemsa_sum

from oracles import harmonic


def test_identity_l2_small():
    assert identity_l2(0) == 1
    assert identity_l2(1) == 1


def test_identity_l2_exact_up_to_50():
    values = [identity_l2(a) for a in range(51)]
    assert all(type(v) is int for v in values)
    assert values == [1] * 51


def test_identity_l2_rejects_negative():
    with pytest.raises(ValueError):
        identity_l2(-1)


def test_composition_count_examples():
    assert composition_count(5, 3) == 6
    assert composition_count(6, 3) == 10
    assert all(composition_count(a, 1) == 1 for a in range(1, 20))


def test_composition_count_matches_enumeration():
    for a in range(1, 13):
        for j in range(1, a + 1):
            brute = sum(1 for t in product(range(1, a + 1), repeat=j) if sum(t) == a) if j <= 6 else None
            listed = list(compositions(a, j))
            assert len(set(listed)) == len(listed)
            assert all(len(t) == j and min(t) >= 1 and sum(t) == a for t in listed)
            assert composition_count(a, j) == len(listed)
            if brute is not None:
                assert brute == len(listed)


def test_composition_count_exact_for_large_inputs():
    assert composition_count(300, 150) == math.comb(299, 149)


@pytest.mark.parametrize("a, j", [(3, 4), (0, 1), (2, 0)])
def test_composition_count_rejects(a, j):
    with pytest.raises(ValueError):
        composition_count(a, j)


def _lemsa_brute(n, k, l):
    total = 0.0
    for js in combinations(range(l, n + 1), k):
        gaps = [js[0]] + [b - a for a, b in zip(js, js[1:])]
        if all(g > l for g in gaps[1:]):
            total += 1.0 / math.prod(gaps)
    return total / math.log(n) ** k


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("l", [1, 2, 3])
def test_lemsa_matches_enumeration(k, l):
    for n in (l * (k + 1), 17, 40):
        if n >= max(2, l * (k + 1)):
            assert lemsa_sum(n, k, l) == pytest.approx(_lemsa_brute(n, k, l), rel=1e-11, abs=1e-15)


def test_lemsa_first_order_is_harmonic():
    for n in (10, 1000, 10**5):
        assert lemsa_sum(n, 1, 1) == pytest.approx(harmonic(n) / math.log(n), rel=1e-12)
    assert 1.0 < lemsa_sum(10**6, 1, 1) < 1.15


@pytest.mark.parametrize("k", [1, 2])
def test_lemsa_approaches_one(k):
    small, big = lemsa_sum(10**3, k, 1), lemsa_sum(10**6, k, 1)
    assert abs(big - 1) < abs(small - 1)


def test_lemsa_guards():
    with pytest.raises(ValueError):
        lemsa_sum(100, MAX_LEMSA_ORDER + 1, 1)
    with pytest.raises(ValueError):
        lemsa_sum(5, 2, 2)
    with pytest.raises(ValueError):
        lemsa_sum(10, 1, 0)
