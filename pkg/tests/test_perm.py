import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from naive import naive_counts, naive_indecomposable, naive_simple
from permlab import (ParseError, Permutation, SizeLimitError, canonical_patterns, count_patterns,
                     density, density_hom, density_mon, dominates, enumerate_patterns, inversions,
                     is_indecomposable, is_simple, is_thorough, sample_uniform_statistics)
from permlab.perm import batch_is_simple, occurrence_table, permutations_of_order

perms = st.integers(1, 7).flatmap(lambda n: st.permutations(list(range(1, n + 1))))


def test_parse_and_format():
    p = Permutation.parse(" 2, 4,1 ,3")
    assert p.values == (2, 4, 1, 3)
    assert str(p) == "2,4,1,3"
    assert Permutation.parse(str(p)) == p


@pytest.mark.parametrize("text, fragment", [
    ("", "empty"), ("1,1", "1"), ("1,3", "3"), ("2,x", "'x'"), ("0,1", "0"), ("1,,2", "position 2"),
])
def test_parse_errors_name_the_problem(text, fragment):
    with pytest.raises(ParseError) as exc:
        Permutation.parse(text)
    assert fragment in str(exc.value)


def test_constructor_rejects_non_bijections():
    with pytest.raises(ValueError):
        Permutation((1, 2, 2))
    with pytest.raises(ValueError):
        Permutation(())


@pytest.mark.parametrize("p, inv", [
    ((1, 2, 3), set()), ((2, 1), {(1, 2)}), ((3, 1, 2), {(1, 2), (1, 3)}),
])
def test_inversions(p, inv):
    assert inversions(p) == inv


@pytest.mark.parametrize("p, expected", [((2, 3, 1), True), ((1, 3, 2), False), ((2, 1), True), ((1,), True)])
def test_is_indecomposable(p, expected):
    assert is_indecomposable(p) is expected


@pytest.mark.parametrize("p, expected", [((2, 4, 1, 3), True), ((1, 2, 3), False), ((4, 5, 1, 2, 3), False)])
def test_is_simple(p, expected):
    assert is_simple(p) is expected


@pytest.mark.parametrize("p, expected", [((2, 4, 1, 3), True), ((1, 2), False), ((3, 1, 2), False)])
def test_is_thorough(p, expected):
    assert is_thorough(p) is expected


@pytest.mark.parametrize("pi, sigma, counts", [
    ((2, 1), (3, 1, 2), (2, 2, 2)),
    ((2, 1), (2, 1), (1, 1, 1)),
    ((2, 1), (1, 2), (0, 0, 0)),
    ((2, 3, 1), (3, 5, 1, 4, 2, 6), (3, 4, 10)),
    ((3, 1, 2), (4, 6, 2, 5, 1, 3, 7), (6, 10, 20)),
])
def test_counts_frozen(pi, sigma, counts):
    for method in ("backtrack", "tables", "auto"):
        c = count_patterns(pi, sigma, method=method)
        assert (c.occ, c.mon, c.hom) == counts


@pytest.mark.parametrize("n", [1, 4, 7])
def test_trivial_pattern_counts(n):
    sigma = Permutation.decreasing(n)
    c = count_patterns((1,), sigma)
    assert (c.occ, c.mon, c.hom) == (n, n, n)


def test_counts_match_oracle_small():
    for n in range(1, 6):
        for sigma in itertools.permutations(range(1, n + 1)):
            for k in range(1, min(n, 3) + 1):
                for pi in itertools.permutations(range(1, k + 1)):
                    c = count_patterns(pi, sigma)
                    assert (c.occ, c.mon, c.hom) == naive_counts(pi, sigma), (pi, sigma)


@settings(max_examples=150, deadline=None)
@given(sigma=perms, data=st.data())
def test_count_chain_and_bounds(sigma, data):
    k = data.draw(st.integers(1, 4))
    pi = data.draw(st.permutations(list(range(1, k + 1))))
    c = count_patterns(pi, sigma)
    n = len(sigma)
    assert c.occ <= c.mon <= c.hom
    assert c.occ <= math.comb(n, k)
    dom = sum(dominates(pi, big) for big in permutations_of_order(k))
    assert c.mon <= math.comb(n, k) * dom
    assert c.hom <= math.comb(n + k - 1, k)
    assert (c.occ, c.mon, c.hom) == naive_counts(pi, sigma)


@settings(max_examples=60, deadline=None)
@given(sigma=st.integers(13, 40).flatmap(lambda n: st.permutations(list(range(1, n + 1)))))
def test_fast_tables_agree_with_backtracking(sigma):
    for k in (2, 3):
        for pi in permutations_of_order(k):
            assert count_patterns(pi, sigma, method="tables") == count_patterns(pi, sigma, method="backtrack")


def test_occurrence_table_sums_to_binomial():
    rng = np.random.default_rng(5)
    sigma = Permutation.from_sequence(rng.permutation(60))
    for k in (1, 2, 3, 4):
        table = occurrence_table(sigma, k)
        assert sum(table.values()) == math.comb(60, k)


@pytest.mark.parametrize("pi, sigma, value", [
    ((2, 1), (3, 1, 2), Fraction(2, 3)), ((2, 1), (2, 1), Fraction(1)), ((2, 1), (1, 2, 3), Fraction(0)),
])
def test_density_examples(pi, sigma, value):
    assert density(pi, sigma) == value


def test_density_zero_when_pattern_longer():
    assert density((2, 1, 3), (2, 1)) == 0
    assert density_mon((2, 1, 3), (2, 1)) == 0
    # homomorphisms use C(n+k-1, k) even when k > n
    assert density_hom((2, 1, 3), (2, 1)) == Fraction(naive_counts((2, 1, 3), (2, 1))[2], math.comb(4, 3))


def test_mon_density_is_sum_over_dominating_patterns():
    for n in range(1, 7):
        for sigma in itertools.permutations(range(1, n + 1)):
            if n == 6 and sum(sigma[:3]) % 3:  # a third of S_6 keeps the run short
                continue
            for k in range(1, min(n, 4) + 1):
                for tau in permutations_of_order(k):
                    total = sum((density(big, sigma) for big in permutations_of_order(k) if dominates(tau, big)),
                                Fraction(0))
                    assert density_mon(tau, sigma) == total


def test_mon_and_hom_densities_close_at_large_order():
    rng = np.random.default_rng(11)
    for n in (200, 300):
        sigma = Permutation.from_sequence(rng.permutation(n))
        for k in (1, 2, 3):
            for tau in permutations_of_order(k):
                assert abs(density_mon(tau, sigma) - density_hom(tau, sigma)) < 0.05


def test_simple_implies_thorough():
    # order 2 is the one exception: (1,2) is simple by convention but not thorough
    assert is_simple((1, 2)) and not is_thorough((1, 2))
    for n in (1, *range(3, 8)):
        for p in permutations_of_order(n):
            if is_simple(p):
                assert is_thorough(p)


def test_predicates_match_oracles():
    for n in range(1, 8):
        for p in permutations_of_order(n):
            assert is_indecomposable(p) == naive_indecomposable(p.values)
            assert is_simple(p) == naive_simple(p.values)


def test_indecomposable_counts():
    counts = [sum(1 for p in enumerate_patterns(n, "indecomposable") if len(p) == n) for n in range(1, 7)]
    assert counts == [1, 1, 3, 13, 71, 461]


def test_simple_counts_small():
    counts = [sum(1 for p in enumerate_patterns(3, "simple") if len(p) == n) for n in (1, 2, 3)]
    assert counts == [1, 2, 0]


def test_canonical_patterns():
    assert [str(p) for p in canonical_patterns(3)] == ["2,1", "2,3,1", "3,1,2", "3,2,1"]
    assert canonical_patterns(1) == []
    pats = canonical_patterns(5)
    assert len(pats) == 1 + 3 + 13 + 71
    keys = [(p.inversion_count(), len(p), p.values) for p in pats]
    assert keys == sorted(keys)
    assert all(is_indecomposable(p) and 2 <= len(p) <= 5 for p in pats)


def test_enumeration_cap():
    with pytest.raises(SizeLimitError):
        enumerate_patterns(9)
    assert len(enumerate_patterns(2, cap=2)) == 3


def test_batch_is_simple_matches_scalar():
    rng = np.random.default_rng(3)
    for n in (4, 5, 6, 9):
        perms_ = np.array([rng.permutation(n) for _ in range(300)])
        fast = batch_is_simple(perms_)
        slow = [is_simple(tuple(int(v) + 1 for v in row)) for row in perms_]
        assert fast.tolist() == slow


def test_uniform_statistics_trivial_and_reproducible():
    s = sample_uniform_statistics(1, 10, seed=7)
    assert s["fraction_indecomposable"] == 1.0
    a = sample_uniform_statistics(30, 25_000, seed=3, threads=1)
    b = sample_uniform_statistics(30, 25_000, seed=3, threads=3)
    assert a == b


def test_uniform_statistics_exact_at_order_4():
    # 13 of 24 permutations of order 4 are indecomposable, 2 are simple
    s = sample_uniform_statistics(4, 200_000, seed=1)
    se = math.sqrt(0.25 / 200_000)
    assert abs(s["fraction_indecomposable"] - 13 / 24) < 4 * se
    assert abs(s["fraction_simple"] - 2 / 24) < 4 * se
