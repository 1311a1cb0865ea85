"""Permutations, structural predicates and pattern counting.

Permutations are written in one-line notation with 1-based values, so
``Permutation((2, 4, 1, 3))`` maps 1->2, 2->4, 3->1, 4->3.  Python indexing on
a ``Permutation`` is 0-based over positions (``p[0] == 2`` above); every
position reported back to the user (inversions, partitions) is 1-based.

Three ways for a pattern ``pi`` of order k to appear in ``sigma`` of order n:

* occurrence: a strictly increasing map [k] -> [n] inducing exactly ``pi``;
* monomorphism: a strictly increasing map that preserves every inversion of
  ``pi`` (non-inversions are free);
* homomorphism: a non-decreasing map that preserves every inversion.

All densities on finite permutations are exact ``Fraction`` values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ParseError, SizeLimitError
from .rng import DEFAULT_SEED, make_rng, run_chunks

ENUMERATION_CAP = 8
PREDICATES = ("all", "indecomposable", "simple", "thorough")


@dataclass(frozen=True, slots=True)
class Permutation:
    values: tuple[int, ...]

    def __init__(self, values: Iterable[int]):
        vals = tuple(int(v) for v in values)
        n = len(vals)
        if n < 1:
            raise ValueError("a permutation has order at least 1")
        if sorted(vals) != list(range(1, n + 1)):
            raise ValueError(f"{vals} is not a bijection of [1..{n}]")
        object.__setattr__(self, "values", vals)

    @classmethod
    def _trusted(cls, vals: tuple[int, ...]) -> "Permutation":
        # skips validation; callers guarantee vals is a permutation of 1..n
        obj = object.__new__(cls)
        object.__setattr__(obj, "values", vals)
        return obj

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        """Parse comma-separated one-line notation such as ``"2,4,1,3"``."""
        if not str(text).strip():
            raise ParseError("empty permutation string")
        tokens = [t.strip() for t in str(text).split(",")]
        vals = []
        for pos, tok in enumerate(tokens, start=1):
            if not tok.isdigit() or int(tok) < 1:
                raise ParseError(f"bad token {tok!r} at position {pos} in {text!r}")
            vals.append(int(tok))
        n = len(vals)
        seen = set()
        for pos, v in enumerate(vals, start=1):
            if v > n:
                raise ParseError(f"value {v} at position {pos} exceeds order {n} in {text!r}")
            if v in seen:
                raise ParseError(f"repeated value {v} at position {pos} in {text!r}")
            seen.add(v)
        return cls._trusted(tuple(vals))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls._trusted(tuple(range(1, n + 1)))

    @classmethod
    def decreasing(cls, n: int) -> "Permutation":
        return cls._trusted(tuple(range(n, 0, -1)))

    @classmethod
    def from_sequence(cls, seq: Sequence) -> "Permutation":
        """The pattern (rank standardization) of a sequence of distinct keys."""
        order = sorted(range(len(seq)), key=seq.__getitem__)
        ranks = [0] * len(seq)
        for r, i in enumerate(order, start=1):
            ranks[i] = r
        return cls._trusted(tuple(ranks))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __str__(self) -> str:
        return ",".join(map(str, self.values))

    def __repr__(self) -> str:
        return f"Permutation(({str(self)}))"

    @property
    def order(self) -> int:
        return len(self.values)

    def inversion_count(self) -> int:
        v = self.values
        return sum(1 for i, j in itertools.combinations(range(len(v)), 2) if v[i] > v[j])

    def sort_key(self) -> tuple:
        """Canonical ordering: inversions, then order, then one-line notation."""
        return (self.inversion_count(), len(self.values), self.values)

    def restrict(self, positions: Sequence[int]) -> "Permutation":
        """Pattern induced by 0-based ``positions`` (assumed increasing)."""
        return Permutation.from_sequence([self.values[i] for i in positions])

    def direct_sum(self, other: "Permutation") -> "Permutation":
        n = len(self)
        return Permutation._trusted(self.values + tuple(v + n for v in other.values))

    def components(self) -> list["Permutation"]:
        """Split into indecomposable blocks, ``self = c1 (+) c2 (+) ...``."""
        out, start, hi = [], 0, 0
        for m, v in enumerate(self.values, start=1):
            hi = max(hi, v)
            if hi == m:
                out.append(Permutation.from_sequence(self.values[start:m]))
                start = m
        return out


@dataclass(frozen=True)
class PatternCounts:
    occ: int
    mon: int
    hom: int


def as_perm(p) -> Permutation:
    if isinstance(p, Permutation):
        return p
    if isinstance(p, str):
        return Permutation.parse(p)
    return Permutation(p)


# -- structural predicates ---------------------------------------------------

def inversions(p) -> set[tuple[int, int]]:
    """1-based pairs ``(i, j)`` with ``i < j`` and ``p(i) > p(j)``."""
    v = as_perm(p).values
    return {(i + 1, j + 1) for i, j in itertools.combinations(range(len(v)), 2) if v[i] > v[j]}


def is_indecomposable(p) -> bool:
    v = as_perm(p).values
    hi = 0
    for m, x in enumerate(v[:-1], start=1):
        hi = max(hi, x)
        if hi == m:
            return False
    return True


def is_simple(p) -> bool:
    """No interval of positions of length 2..n-1 maps onto an interval of values."""
    v = as_perm(p).values
    n = len(v)
    for i in range(n - 1):
        lo = hi = v[i]
        for j in range(i + 1, n):
            x = v[j]
            if x < lo:
                lo = x
            elif x > hi:
                hi = x
            if hi - lo == j - i and not (i == 0 and j == n - 1):
                return False
    return True


def is_thorough(p) -> bool:
    v = as_perm(p).values
    return all(v[i + 1] != v[i] + 1 for i in range(len(v) - 1))


def dominates(small, big) -> bool:
    """True when the identity map is a monomorphism from ``small`` to ``big``."""
    small, big = as_perm(small), as_perm(big)
    return len(small) == len(big) and inversions(small) <= inversions(big)


_PREDICATE_FNS = {
    "all": lambda p: True,
    "indecomposable": is_indecomposable,
    "simple": is_simple,
    "thorough": is_thorough,
}


# -- enumeration -------------------------------------------------------------

def enumerate_patterns(q: int, predicate: str = "all", *, nontrivial: bool = False,
                       cap: int = ENUMERATION_CAP) -> list[Permutation]:
    """All permutations of order <= q passing ``predicate``, canonically ordered."""
    if predicate not in _PREDICATE_FNS:
        raise ValueError(f"unknown predicate {predicate!r}; expected one of {PREDICATES}")
    if q < 1:
        raise ValueError("q must be at least 1")
    if q > cap:
        raise SizeLimitError(f"order bound {q} exceeds enumeration cap {cap} "
                             f"({math.factorial(q)} permutations of order {q})")
    return list(_enumerate_cached(q, predicate, nontrivial))


@lru_cache(maxsize=None)
def _enumerate_cached(q: int, predicate: str, nontrivial: bool) -> tuple[Permutation, ...]:
    keep = _PREDICATE_FNS[predicate]
    out = []
    for n in range(2 if nontrivial else 1, q + 1):
        for vals in itertools.permutations(range(1, n + 1)):
            p = Permutation._trusted(vals)
            if keep(p):
                out.append(p)
    out.sort(key=Permutation.sort_key)
    return tuple(out)


def canonical_patterns(q: int, *, cap: int = ENUMERATION_CAP) -> list[Permutation]:
    """The non-trivial indecomposable permutations of order <= q, canonically ordered."""
    return enumerate_patterns(q, "indecomposable", nontrivial=True, cap=cap)


@lru_cache(maxsize=None)
def permutations_of_order(n: int) -> tuple[Permutation, ...]:
    return tuple(Permutation._trusted(v) for v in itertools.permutations(range(1, n + 1)))


# -- counting ----------------------------------------------------------------

def _count_backtrack(pi: tuple[int, ...], sigma: tuple[int, ...], mode: str) -> int:
    k, n = len(pi), len(sigma)
    strict = mode != "hom"
    if strict and k > n:
        return 0
    if mode == "occ":
        # nearest earlier pattern entries just below / just above pi[t]
        below, above = [], []
        for t in range(k):
            lo = [s for s in range(t) if pi[s] < pi[t]]
            hi = [s for s in range(t) if pi[s] > pi[t]]
            below.append(max(lo, key=pi.__getitem__) if lo else None)
            above.append(min(hi, key=pi.__getitem__) if hi else None)
    else:
        must_exceed = [[s for s in range(t) if pi[s] > pi[t]] for t in range(k)]
    chosen = [0] * k

    def rec(t: int, start: int) -> int:
        if t == k:
            return 1
        last = n - (k - t) if strict else n - 1
        total = 0
        for pos in range(start, last + 1):
            x = sigma[pos]
            if mode == "occ":
                b, a = below[t], above[t]
                if b is not None and sigma[chosen[b]] > x:
                    continue
                if a is not None and sigma[chosen[a]] < x:
                    continue
            else:
                if any(sigma[chosen[s]] <= x for s in must_exceed[t]):
                    continue
            chosen[t] = pos
            total += rec(t + 1, pos + 1 if strict else pos)
        return total

    return rec(0, 0)


def _pattern_table_order3(a: np.ndarray) -> dict[tuple[int, ...], int]:
    """Occurrence counts of all six order-3 patterns in O(n^2) time."""
    n = len(a)
    counts = dict.fromkeys(permutation_tuples(3), 0)
    seen = np.zeros(n + 1, dtype=np.int64)  # seen[v] = 1 if value v occurred left of j
    for j in range(n):
        b = int(a[j])
        cum = np.cumsum(seen)  # cum[v] = #{i < j : a_i <= v}
        right = a[j + 1:]
        l_lo = int(cum[b - 1]) if b >= 1 else 0
        l_hi = j - l_lo
        r_lo_vals = right[right < b]
        r_hi_vals = right[right > b]
        r_lo, r_hi = len(r_lo_vals), len(r_hi_vals)
        counts[(1, 2, 3)] += l_lo * r_hi
        counts[(3, 2, 1)] += l_hi * r_lo
        # left and right both below b: split by left < right
        c132 = int(cum[r_lo_vals - 1].sum()) if r_lo else 0
        counts[(1, 3, 2)] += c132
        counts[(2, 3, 1)] += l_lo * r_lo - c132
        # both above b: left value strictly between b and right value
        c213 = int((cum[r_hi_vals - 1] - cum[b]).sum()) if r_hi else 0
        counts[(2, 1, 3)] += c213
        counts[(3, 1, 2)] += l_hi * r_hi - c213
        seen[b] = 1
    return counts


@lru_cache(maxsize=None)
def permutation_tuples(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.permutations(range(1, n + 1)))


@lru_cache(maxsize=64)
def occurrence_table(sigma: Permutation, k: int) -> dict[tuple[int, ...], int]:
    """Occurrence count of every pattern of order k in sigma (zeros included)."""
    n = len(sigma)
    table = dict.fromkeys(permutation_tuples(k), 0) if k <= ENUMERATION_CAP else {}
    if k > n:
        return table
    if k == 1:
        table[(1,)] = n
    elif k == 2:
        a = np.asarray(sigma.values)
        inv = int(np.triu(a[:, None] > a[None, :], 1).sum())
        table[(1, 2)] = math.comb(n, 2) - inv
        table[(2, 1)] = inv
    elif k == 3:
        table.update(_pattern_table_order3(np.asarray(sigma.values, dtype=np.int64)))
    else:
        v = sigma.values
        for idx in itertools.combinations(range(n), k):
            key = Permutation.from_sequence([v[i] for i in idx]).values
            table[key] = table.get(key, 0) + 1
    return table


# tables beat backtracking once C(n, k) enumeration is no longer trivial
_TABLE_THRESHOLD = 12


def count_occurrences(pi, sigma) -> int:
    pi, sigma = as_perm(pi), as_perm(sigma)
    k, n = len(pi), len(sigma)
    if k > n:
        return 0
    if k <= 3 and n > _TABLE_THRESHOLD:
        return occurrence_table(sigma, k)[pi.values]
    return _count_backtrack(pi.values, sigma.values, "occ")


def _required_inversions(pi: tuple[int, ...], runs: list[tuple[int, int]]) -> set:
    """Inversions forced between merged runs of pattern positions."""
    req = set()
    for a, (s1, e1) in enumerate(runs):
        for b in range(a + 1, len(runs)):
            s2, e2 = runs[b]
            if any(pi[x] > pi[y] for x in range(s1, e1) for y in range(s2, e2)):
                req.add((a, b))
    return req


def _count_by_inversion_superset(req: set, length: int, sigma: Permutation) -> int:
    """Strictly increasing maps of ``length`` points forcing inversions ``req``."""
    if length > len(sigma):
        return 0
    total = 0
    for tup in permutation_tuples(length):
        if all(tup[a] > tup[b] for a, b in req):
            total += count_occurrences(Permutation._trusted(tup), sigma)
    return total


def _count_mon_hom_via_tables(pi: Permutation, sigma: Permutation) -> tuple[int, int]:
    v = pi.values
    k = len(v)
    mon = _count_by_inversion_superset(_required_inversions(v, [(i, i + 1) for i in range(k)]), k, sigma)
    hom = 0
    # a non-decreasing map merges consecutive runs; a run must carry no inversion
    for cuts in itertools.product((0, 1), repeat=k - 1):
        runs, start = [], 0
        for i, c in enumerate(cuts, start=1):
            if c:
                runs.append((start, i))
                start = i
        runs.append((start, k))
        if any(any(v[x] > v[x + 1] for x in range(s, e - 1)) for s, e in runs):
            continue
        hom += _count_by_inversion_superset(_required_inversions(v, runs), len(runs), sigma)
    return mon, hom


def count_patterns(pi, sigma, *, method: str = "auto") -> PatternCounts:
    """Exact occurrence, monomorphism and homomorphism counts of ``pi`` in ``sigma``.

    ``method="backtrack"`` enumerates index tuples with partial-pattern
    pruning; ``method="tables"`` reduces monomorphisms and homomorphisms to
    occurrence counts of dominating patterns (fast for orders up to 3).
    ``"auto"`` picks tables only when the pattern is short and ``sigma`` long.
    """
    pi, sigma = as_perm(pi), as_perm(sigma)
    if method == "auto":
        method = "tables" if len(pi) <= 3 and len(sigma) > _TABLE_THRESHOLD else "backtrack"
    if method == "backtrack":
        return PatternCounts(
            occ=_count_backtrack(pi.values, sigma.values, "occ"),
            mon=_count_backtrack(pi.values, sigma.values, "mon"),
            hom=_count_backtrack(pi.values, sigma.values, "hom"),
        )
    if method == "tables":
        mon, hom = _count_mon_hom_via_tables(pi, sigma)
        return PatternCounts(occ=count_occurrences(pi, sigma), mon=mon, hom=hom)
    raise ValueError(f"unknown counting method {method!r}")


def density(pi, sigma) -> Fraction:
    pi, sigma = as_perm(pi), as_perm(sigma)
    k, n = len(pi), len(sigma)
    if k > n:
        return Fraction(0)
    return Fraction(count_occurrences(pi, sigma), math.comb(n, k))


def density_mon(pi, sigma) -> Fraction:
    pi, sigma = as_perm(pi), as_perm(sigma)
    k, n = len(pi), len(sigma)
    if k > n:
        return Fraction(0)
    return Fraction(count_patterns(pi, sigma).mon, math.comb(n, k))


def density_hom(pi, sigma) -> Fraction:
    # denominator C(n+k-1, k) is used even when k > n
    pi, sigma = as_perm(pi), as_perm(sigma)
    k, n = len(pi), len(sigma)
    return Fraction(count_patterns(pi, sigma).hom, math.comb(n + k - 1, k))


# -- uniform random permutations -------------------------------------------

def _batch_decomposable(perms: np.ndarray) -> np.ndarray:
    """Row-wise: does some proper prefix map onto itself? (0-based values)."""
    n = perms.shape[1]
    if n == 1:
        return np.zeros(len(perms), dtype=bool)
    prefix_max = np.maximum.accumulate(perms[:, :-1], axis=1)
    return (prefix_max == np.arange(n - 1)).any(axis=1)


def batch_is_simple(perms: np.ndarray) -> np.ndarray:
    """Row-wise simplicity test for a (rows, n) array of 0-based permutations."""
    rows, n = perms.shape
    if n <= 2:
        return np.ones(rows, dtype=bool)
    # an adjacent pair of consecutive values is a proper interval already
    simple = ~(np.abs(np.diff(perms, axis=1)) == 1).any(axis=1)
    idx = np.flatnonzero(simple)
    if idx.size == 0:
        return simple
    sub_all = perms[idx]
    bad = np.zeros(idx.size, dtype=bool)
    for i in range(n - 2):
        sub = sub_all[:, i:]
        width = np.maximum.accumulate(sub, axis=1) - np.minimum.accumulate(sub, axis=1)
        hit = width[:, 2:] == np.arange(2, n - i)
        if i == 0:
            hit[:, -1] = False
        bad |= hit.any(axis=1)
    simple[idx] = ~bad
    return simple


def sample_uniform_statistics(n: int, samples: int, seed=DEFAULT_SEED, *, threads: int = 1) -> dict:
    """Monte Carlo fractions of indecomposable and simple uniform permutations.

    Rows are shuffled with numpy's Fisher-Yates (``Generator.permuted``);
    chunk ``i`` uses its own stream, so the result is fixed by ``seed`` alone.
    """
    if n < 1 or samples < 1:
        raise ValueError("n and samples must be positive")

    def work(chunk: int, size: int) -> tuple[int, int]:
        rng = make_rng(seed, 0, chunk)
        perms = rng.permuted(np.tile(np.arange(n, dtype=np.int32), (size, 1)), axis=1)
        return int((~_batch_decomposable(perms)).sum()), int(batch_is_simple(perms).sum())

    parts = run_chunks(work, samples, threads)
    indec = sum(p[0] for p in parts)
    simple = sum(p[1] for p in parts)
    return {
        "n": n,
        "samples": samples,
        "seed": int(seed),
        "fraction_indecomposable": indec / samples,
        "fraction_simple": simple / samples,
    }
