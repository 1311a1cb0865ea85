"""Density vectors of indecomposable patterns and the full-dimensionality witness.

Vectors are indexed by ``canonical_patterns(q)``: every non-trivial
indecomposable permutation of order at most q, sorted by inversion count,
then order, then one-line notation.

The witness pipeline:

1. ``find_spanning_system`` picks r step-up permutons whose density vectors
   form a non-singular matrix ``V`` (``V[i][j] = t(tau_j, phi_i)``).
2. ``psi_map`` sends weights ``x`` to the density vector of the direct sum
   of those permutons, ``Psi_j(x) = sum_i x_i^|tau_j| V[i][j]``.
3. ``certify_interior_point`` finds ``x`` where the Jacobian of ``Psi`` is
   non-singular, so the image of a neighbourhood of ``x`` contains an open
   set of achievable density vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize

from . import linalg
from .errors import ContractViolation, InternalConsistencyError, SearchFailure
from .perm import (ENUMERATION_CAP, Permutation, as_perm, canonical_patterns, count_patterns,
                   density, dominates, enumerate_patterns, is_indecomposable, is_thorough)
from .permuton import (DirectSum, Identity, Permuton, StepUp, _dsum_value, density_exact,
                       density_mc, density_mon_permuton, to_fraction, to_json)
from .rng import DEFAULT_SEED, make_rng

KINDS = ("occurrence", "monomorphism", "homomorphism")


@dataclass(frozen=True)
class DensityVector:
    q: int
    kind: str
    values: tuple
    exact: bool = True
    stderr: tuple | None = None

    @property
    def patterns(self) -> list[Permutation]:
        return canonical_patterns(self.q)

    def __len__(self) -> int:
        return len(self.values)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "kind": self.kind,
            "exact": self.exact,
            "patterns": [str(p) for p in self.patterns],
            "values": [str(v) if self.exact else float(v) for v in self.values],
            **({"stderr": list(self.stderr)} if self.stderr is not None else {}),
        }


def density_vector(obj, q: int, kind: str = "occurrence", *, method: str = "exact",
                   samples: int = 1_000_000, seed=DEFAULT_SEED) -> DensityVector:
    """Density vector of a permutation or permuton over the canonical list.

    Permutations support all three kinds.  Permutons support occurrence and
    monomorphism densities, exactly by default or by Monte Carlo with
    ``method="mc"`` (standard errors attached).
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if q < 2:
        raise ValueError("q must be at least 2")
    pats = canonical_patterns(q)
    if isinstance(obj, Permuton):
        if kind == "homomorphism":
            raise ContractViolation("homomorphism densities are defined for permutations only")
        if method == "mc":
            fn = density_mc if kind == "occurrence" else _mon_mc
            ests = [fn(t, obj, samples, seed) for t in pats]
            return DensityVector(q, kind, tuple(e.value for e in ests), exact=False,
                                 stderr=tuple(e.stderr for e in ests))
        fn = density_exact if kind == "occurrence" else density_mon_permuton
        return DensityVector(q, kind, tuple(fn(t, obj) for t in pats))
    sigma = as_perm(obj)
    if kind == "occurrence":
        vals = tuple(density(t, sigma) for t in pats)
    else:
        n = len(sigma)
        vals = []
        for t in pats:
            c = count_patterns(t, sigma)
            k = len(t)
            if kind == "monomorphism":
                vals.append(Fraction(c.mon, math.comb(n, k)) if k <= n else Fraction(0))
            else:
                vals.append(Fraction(c.hom, math.comb(n + k - 1, k)))
        vals = tuple(vals)
    return DensityVector(q, kind, vals)


def _mon_mc(tau, phi, samples, seed):
    from .permuton import density_mon_mc
    return density_mon_mc(tau, phi, samples, seed)


# -- change of basis between occurrence and monomorphism vectors -------------

@dataclass(frozen=True)
class MonMatrix:
    """``entries[i][j] = 1`` iff the identity map is a monomorphism from tau_i to tau_j."""

    q: int
    entries: tuple[tuple[int, ...], ...]

    @property
    def patterns(self) -> list[Permutation]:
        return canonical_patterns(self.q)

    def det(self) -> Fraction:
        return linalg.det(self.entries)

    def is_unit_upper_triangular(self) -> bool:
        r = len(self.entries)
        return all(self.entries[i][i] == 1 for i in range(r)) and all(
            self.entries[i][j] == 0 for i in range(r) for j in range(i))


@lru_cache(maxsize=None)
def mon_matrix(q: int) -> MonMatrix:
    pats = canonical_patterns(q)
    entries = tuple(tuple(int(dominates(a, b)) for b in pats) for a in pats)
    m = MonMatrix(q, entries)
    if not m.is_unit_upper_triangular():
        raise InternalConsistencyError(f"monomorphism matrix for q={q} is not unit upper triangular")
    return m


def transform_vector(v: DensityVector, direction: str) -> DensityVector:
    """``occ->mon`` multiplies by the monomorphism matrix, ``mon->occ`` inverts it."""
    m = mon_matrix(v.q).entries
    if len(v.values) != len(m):
        raise ValueError(f"vector length {len(v.values)} does not match q={v.q}")
    if direction == "occ->mon":
        if v.kind != "occurrence":
            raise ValueError("expected an occurrence vector")
        vals, kind = linalg.matvec(m, list(v.values)), "monomorphism"
    elif direction == "mon->occ":
        if v.kind == "occurrence":
            raise ValueError("expected a monomorphism vector")
        vals, kind = linalg.back_substitute_unit_upper(m, list(v.values)), "occurrence"
    else:
        raise ValueError("direction must be 'occ->mon' or 'mon->occ'")
    return DensityVector(v.q, kind, tuple(vals), exact=v.exact, stderr=None)


# -- spanning systems and the Psi map ----------------------------------------

@dataclass(frozen=True)
class SpanningSystem:
    q: int
    permutons: tuple[StepUp, ...]
    V: tuple[tuple[Fraction, ...], ...]
    det: Fraction = field(compare=False)
    attempts: int = field(default=1, compare=False)

    @property
    def patterns(self) -> list[Permutation]:
        return canonical_patterns(self.q)

    @property
    def orders(self) -> list[int]:
        return [len(t) for t in self.patterns]

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "patterns": [str(p) for p in self.patterns],
            "permutons": [to_json(p) for p in self.permutons],
            "V": linalg.to_strings(self.V),
            "det": str(self.det),
            "attempts": self.attempts,
        }


def _random_weights(rng: np.random.Generator, n: int) -> tuple[Fraction, ...]:
    nums = [int(a) for a in rng.integers(1, 10, size=n)]
    denom = sum(nums) + int(rng.integers(0, 10))
    return tuple(Fraction(a, denom) for a in nums)


def build_system(q: int, permutons: Sequence[StepUp], attempts: int = 1) -> SpanningSystem:
    pats = canonical_patterns(q)
    if len(permutons) != len(pats):
        raise ValueError(f"need {len(pats)} permutons for q={q}")
    V = tuple(tuple(density_exact(t, phi) for t in pats) for phi in permutons)
    return SpanningSystem(q, tuple(permutons), V, linalg.det(V), attempts)


def find_spanning_system(q: int, seed=DEFAULT_SEED, max_attempts: int = 50,
                         *, threshold: float = 0.0) -> SpanningSystem:
    """Random step-up permutons with an exactly non-singular density matrix.

    Attempt 0 puts one step-up over each canonical pattern; later attempts
    draw the base permutations at random.  Success needs ``det V != 0`` in
    exact arithmetic and ``|det V| > threshold``.
    """
    pats = canonical_patterns(q)
    bases = enumerate_patterns(q, "indecomposable", nontrivial=True)
    best = None
    for attempt in range(max_attempts):
        rng = make_rng(seed, 2, attempt)
        chosen = pats if attempt == 0 else [bases[int(i)] for i in rng.integers(0, len(bases), len(pats))]
        system = build_system(q, [StepUp(b, _random_weights(rng, len(b))) for b in chosen], attempt + 1)
        if system.det != 0 and abs(float(system.det)) > threshold:
            return system
        if best is None or abs(system.det) > abs(best.det):
            best = system
    raise SearchFailure(f"no non-singular spanning system for q={q} in {max_attempts} attempts",
                        {"best_abs_det": float(abs(best.det)) if best else 0.0})


def _coerce_point(x: Sequence):
    if all(isinstance(v, (int, Fraction, str)) for v in x):
        return [to_fraction(v) for v in x]
    return [float(v) for v in x]


def _check_box(system: SpanningSystem, x: Sequence) -> None:
    r = len(system.V)
    if len(x) != r:
        raise ContractViolation(f"expected {r} coordinates, got {len(x)}")
    if not all(0 < v < Fraction(1, r) for v in x):
        raise ContractViolation(f"x must lie strictly inside (0, 1/{r})^{r}")


def psi_map(system: SpanningSystem, x: Sequence, *, check_box: bool = True) -> DensityVector:
    """``Psi_j(x) = sum_i x_i^|tau_j| V[i][j]``."""
    x = _coerce_point(x)
    if check_box:
        _check_box(system, x)
    orders, V, r = system.orders, system.V, len(system.V)
    vals = tuple(sum((x[i] ** orders[j] * V[i][j] for i in range(r)), 0 * x[0]) for j in range(r))
    exact = isinstance(x[0], Fraction)
    return DensityVector(system.q, "occurrence", vals if exact else tuple(float(v) for v in vals),
                         exact=exact)


def direct_sum_of(system: SpanningSystem, x: Sequence) -> DirectSum:
    return DirectSum(list(zip(_coerce_point(x), system.permutons)))


@dataclass(frozen=True)
class Jacobian:
    matrix: tuple[tuple, ...]  # matrix[j][i] = dPsi_j / dx_i
    det: object


def jacobian(system: SpanningSystem, x: Sequence, *, check_box: bool = True) -> Jacobian:
    x = _coerce_point(x)
    if check_box:
        _check_box(system, x)
    orders, V, r = system.orders, system.V, len(system.V)
    rows = tuple(tuple(orders[j] * x[i] ** (orders[j] - 1) * V[i][j] for i in range(r))
                 for j in range(r))
    if not isinstance(x[0], Fraction):
        rows = tuple(tuple(float(v) for v in row) for row in rows)
    return Jacobian(rows, linalg.det(rows))


def numerical_jacobian(system: SpanningSystem, x: Sequence, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of ``psi_map``; row j, column i."""
    x0 = np.array([float(v) for v in x])
    r = len(x0)
    out = np.zeros((r, r))
    for i in range(r):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        fp = np.array(psi_map(system, list(xp), check_box=False).values, dtype=float)
        fm = np.array(psi_map(system, list(xm), check_box=False).values, dtype=float)
        out[:, i] = (fp - fm) / (2 * h)
    return out


def finite_difference_error(system: SpanningSystem, x: Sequence, h: float = 1e-6) -> float:
    """Largest entrywise relative gap between the analytic and numerical Jacobians.

    Entries that vanish analytically contribute their absolute numerical value.
    """
    exact = jacobian(system, x, check_box=False).matrix
    num = numerical_jacobian(system, x, h)
    worst = 0.0
    for j, row in enumerate(exact):
        for i, a in enumerate(row):
            a = float(a)
            gap = abs(a - num[j][i])
            worst = max(worst, gap / abs(a) if a else gap)
    return worst


@dataclass(frozen=True)
class InteriorWitness:
    system: SpanningSystem
    x: tuple[Fraction, ...]
    w: DensityVector
    det: Fraction
    draws: int

    def to_json(self) -> dict:
        return {
            "system": self.system.to_json(),
            "x": [str(v) for v in self.x],
            "w": [str(v) for v in self.w.values],
            "det_jacobian": str(self.det),
            "abs_det_float": abs(float(self.det)),
            "draws": self.draws,
        }


def certify_interior_point(q: int, seed=DEFAULT_SEED, budget: int = 1000, *,
                           system: SpanningSystem | None = None,
                           denominator: int = 1000) -> InteriorWitness:
    """Random rational ``x`` in ``(0, 1/r)^r`` with exactly non-zero Jacobian determinant."""
    system = system or find_spanning_system(q, seed)
    r = len(system.V)
    for draw in range(budget):
        rng = make_rng(seed, 3, draw)
        x = tuple(Fraction(int(a), r * denominator) for a in rng.integers(1, denominator, size=r))
        jac = jacobian(system, x)
        if jac.det != 0:
            return InteriorWitness(system, x, psi_map(system, x), jac.det, draw + 1)
    raise SearchFailure(f"no non-singular Jacobian found in {budget} draws", {"q": q})


# -- antipodal pair search ---------------------------------------------------

def thorough_family(count: int, n: int, seed=DEFAULT_SEED) -> list[Permutation]:
    """``count`` distinct thorough indecomposable permutations of order ``n``."""
    rng = make_rng(seed, 4)
    if n <= ENUMERATION_CAP:
        pool = [p for p in enumerate_patterns(n, "thorough") if len(p) == n and is_indecomposable(p)]
        if len(pool) < count:
            raise ContractViolation(f"only {len(pool)} thorough indecomposable permutations of order {n}")
        idx = sorted(int(i) for i in rng.choice(len(pool), size=count, replace=False))
        return [pool[i] for i in idx]
    found: list[Permutation] = []
    while len(found) < count:
        p = Permutation._trusted(tuple(int(v) + 1 for v in rng.permutation(n)))
        if is_thorough(p) and is_indecomposable(p) and p not in found:
            found.append(p)
    return found


@dataclass
class BorsukPair:
    targets: list[Permutation]
    family: list[Permutation]
    n: int
    v: list[float]
    v_prime: list[float]
    residual: float
    index: int  # 0-based family member whose density separates the pair
    gap: Fraction  # n!(v_i/n)^n - n!(v'_i/n)^n
    converged: bool
    starts: int

    def permutons(self) -> tuple[DirectSum, DirectSum]:
        return (family_permuton(self.family, self.n, self.v),
                family_permuton(self.family, self.n, self.v_prime))

    def to_json(self) -> dict:
        return {
            "targets": [str(t) for t in self.targets],
            "family": [str(p) for p in self.family],
            "n": self.n,
            "v": self.v,
            "v_prime": self.v_prime,
            "residual": self.residual,
            "witness_index": self.index + 1,
            "witness_permutation": str(self.family[self.index]),
            "gap": float(self.gap),
            "converged": self.converged,
            "starts": self.starts,
        }


def family_permuton(family: Sequence[Permutation], n: int, u: Sequence) -> DirectSum:
    """Direct sum of uniform-weight step-ups over the family, block weights ``u``."""
    leaf_w = (Fraction(1, n),) * n
    return DirectSum([(Fraction(ui) if isinstance(ui, float) else to_fraction(ui), StepUp(p, leaf_w))
                      for ui, p in zip(u, family)])


def thorough_density(n: int, u) -> Fraction:
    """``n! (u/n)^n``: density of a thorough family member in its own block."""
    u = Fraction(u)
    return math.factorial(n) * (u / n) ** n


def validate_pair(v: Sequence, v_prime: Sequence, min_separation: float) -> None:
    sep = max(abs(a - b) for a, b in zip(v, v_prime))
    if sep < min_separation:
        raise ContractViolation(f"pair separation {sep} is below {min_separation}")


def borsuk_pair_search(targets, n: int, seed=DEFAULT_SEED, budget: int = 50, *,
                       tol: float = 1e-8, family: Sequence[Permutation] | None = None) -> BorsukPair:
    """Distinct weight vectors on which every target density agrees.

    With k targets, k+1 thorough indecomposable permutations of order n are
    placed as uniform step-up blocks of a direct sum with weights ``u``.
    Antipodal points ``c +/- rho d`` of a k-sphere around
    ``c = (1/(2(k+1)), ...)`` with radius ``1/(4(k+1))`` are searched for
    equal target densities: bisection on the circle when k = 1, multi-start
    least squares otherwise.  The result is flagged unconverged when the
    budget runs out above ``tol``.
    """
    targets = [as_perm(t) for t in targets]
    k = len(targets)
    if k < 1:
        raise ContractViolation("at least one target pattern is required")
    if n <= max(len(t) for t in targets):
        raise ContractViolation(f"n={n} must exceed every target order")
    family = list(family) if family is not None else thorough_family(k + 1, n, seed)
    if len(family) != k + 1 or any(len(p) != n or not is_thorough(p) or not is_indecomposable(p)
                                  for p in family):
        raise ContractViolation(f"family must hold {k + 1} thorough indecomposable permutations of order {n}")

    leaf_phi = [StepUp(p, (Fraction(1, n),) * n) for p in family] + [Identity()]

    @lru_cache(maxsize=None)
    def leaf(b: int, beta: Permutation) -> float:
        return float(density_exact(beta, leaf_phi[b]))

    def gamma(u: np.ndarray) -> np.ndarray:
        w = list(map(float, u)) + [1.0 - float(u.sum())]
        return np.array([_dsum_value(t, w, leaf) for t in targets])

    center = np.full(k + 1, 1.0 / (2 * (k + 1)))
    rho = 1.0 / (4 * (k + 1))

    def split(d: np.ndarray) -> np.ndarray:
        return gamma(center + rho * d) - gamma(center - rho * d)

    best_d, best_res, starts = None, math.inf, 0
    if k == 1:
        def h(theta: float) -> float:
            return float(split(np.array([math.cos(theta), math.sin(theta)]))[0])
        starts = 1
        h0 = h(0.0)
        if h0 == 0:
            theta = 0.0
        else:
            theta = optimize.brentq(h, 0.0, math.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        best_d = np.array([math.cos(theta), math.sin(theta)])
        best_res = float(np.linalg.norm(split(best_d)))
    else:
        rng = make_rng(seed, 5)
        for start in range(budget):
            starts = start + 1
            w0 = rng.normal(size=k + 1)
            sol = optimize.least_squares(lambda w: split(w / np.linalg.norm(w)), w0,
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
            d = sol.x / np.linalg.norm(sol.x)
            res = float(np.linalg.norm(split(d)))
            if res < best_res:
                best_d, best_res = d, res
            if res <= tol:
                break
    v = center + rho * best_d
    vp = center - rho * best_d
    validate_pair(v, vp, rho / math.sqrt(k + 1))
    idx = int(np.argmax(np.abs(v - vp)))
    gap = thorough_density(n, Fraction(float(v[idx]))) - thorough_density(n, Fraction(float(vp[idx])))
    return BorsukPair(targets, family, n, [float(a) for a in v], [float(a) for a in vp], best_res,
                      idx, gap, best_res <= tol, starts)
