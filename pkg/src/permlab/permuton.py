"""Constructible permutons, random sampling and subpermutation densities.

Five node types compose into a tree:

``Uniform``   the uniform measure on the unit square
``Identity``  uniform measure on the diagonal y = x
``Reverse``   uniform measure on the anti-diagonal y = 1 - x
``StepUp``    diagonal segments laid out by a weighted permutation, with the
              unused weight on a final diagonal segment ending at (1, 1)
``DirectSum`` weighted blocks down the diagonal; unused weight is an
              ``Identity`` block in the top-right corner

Weights are exact ``Fraction`` values, so every density below is an exact
rational.  The step-up rule treats the trailing diagonal segment as one more
ordinary segment (``sigma (+) 1``), which gives exact densities for every
pattern, decomposable ones included; for indecomposable patterns the extra
segment never contributes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .compressive import enumerate_compressive, quotient
from .errors import ContractViolation, InternalConsistencyError, ParseError
from .perm import Permutation, as_perm, dominates, is_indecomposable, permutations_of_order
from .rng import DEFAULT_SEED, make_rng, run_chunks

MAX_DEPTH = 16


def to_fraction(x) -> Fraction:
    """Accept ints, Fractions, ``"a/b"`` or decimal strings; floats via repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not weights")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip())


class Permuton:
    """Base class; see the module docstring for the concrete node types."""

    type_name = ""

    def depth(self) -> int:
        return 1


@dataclass(frozen=True)
class Uniform(Permuton):
    type_name = "uniform"


@dataclass(frozen=True)
class Identity(Permuton):
    type_name = "identity"


@dataclass(frozen=True)
class Reverse(Permuton):
    type_name = "reverse"


@dataclass(frozen=True)
class StepUp(Permuton):
    sigma: Permutation
    weights: tuple[Fraction, ...]

    type_name = "stepup"

    def __init__(self, sigma, weights):
        sigma = as_perm(sigma)
        weights = tuple(to_fraction(w) for w in weights)
        if len(weights) != len(sigma):
            raise ValueError(f"step-up over {sigma} needs {len(sigma)} weights, got {len(weights)}")
        if any(w <= 0 for w in weights):
            raise ValueError("step-up weights must be positive")
        if sum(weights) > 1:
            raise ValueError(f"step-up weights sum to {sum(weights)} > 1")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "weights", weights)

    @property
    def tail(self) -> Fraction:
        return 1 - sum(self.weights)

    def segments(self) -> list[tuple[Fraction, Fraction, Fraction]]:
        """``(x0, y0, length)`` of every support segment, trailing one included."""
        s, v = self.sigma.values, self.weights
        out, x0 = [], Fraction(0)
        for i, w in enumerate(v):
            y0 = sum((v[j] for j in range(len(v)) if s[j] < s[i]), Fraction(0))
            out.append((x0, y0, w))
            x0 += w
        if self.tail > 0:
            out.append((x0, x0, self.tail))
        return out


@dataclass(frozen=True)
class DirectSum(Permuton):
    parts: tuple[tuple[Fraction, Permuton], ...]

    type_name = "dsum"

    def __init__(self, parts):
        parts = tuple((to_fraction(w), phi) for w, phi in parts)
        if not parts:
            raise ValueError("a direct sum needs at least one part")
        if any(w <= 0 for w, _ in parts):
            raise ValueError("direct-sum weights must be positive")
        if sum(w for w, _ in parts) > 1:
            raise ValueError(f"direct-sum weights sum to {sum(w for w, _ in parts)} > 1")
        if any(not isinstance(phi, Permuton) for _, phi in parts):
            raise TypeError("direct-sum parts must be Permuton instances")
        object.__setattr__(self, "parts", parts)
        if self.depth() > MAX_DEPTH:
            raise ValueError(f"nesting depth exceeds {MAX_DEPTH}")

    @property
    def tail(self) -> Fraction:
        return 1 - sum(w for w, _ in self.parts)

    def blocks(self) -> list[tuple[Fraction, Permuton]]:
        """Parts followed by the implicit identity block when weight is left over."""
        out = list(self.parts)
        if self.tail > 0:
            out.append((self.tail, Identity()))
        return out

    def depth(self) -> int:
        return 1 + max(phi.depth() for _, phi in self.parts)


# -- JSON interchange --------------------------------------------------------

def to_json(phi: Permuton) -> dict:
    if isinstance(phi, StepUp):
        return {"type": "stepup", "sigma": str(phi.sigma), "weights": [str(w) for w in phi.weights]}
    if isinstance(phi, DirectSum):
        return {"type": "dsum",
                "parts": [{"weight": str(w), "permuton": to_json(p)} for w, p in phi.parts]}
    return {"type": phi.type_name}


def _weight(raw, path: str) -> Fraction:
    if isinstance(raw, (bool, dict, list)) or raw is None:
        raise ParseError(f"{path}: weight must be a decimal or 'a/b' string, got {raw!r}")
    try:
        w = to_fraction(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"{path}: cannot parse weight {raw!r}") from exc
    if w <= 0:
        raise ParseError(f"{path}: weight {raw!r} is not positive")
    return w


def from_json(obj, path: str = "$", _depth: int = 1) -> Permuton:
    """Load the tagged permuton schema; errors name the offending node path."""
    if _depth > MAX_DEPTH:
        raise ParseError(f"{path}: nesting depth exceeds {MAX_DEPTH}")
    if not isinstance(obj, dict) or "type" not in obj:
        raise ParseError(f"{path}: expected an object with a 'type' field")
    kind = obj["type"]
    if kind == "uniform":
        return Uniform()
    if kind == "identity":
        return Identity()
    if kind == "reverse":
        return Reverse()
    if kind == "stepup":
        try:
            sigma = Permutation.parse(obj["sigma"])
        except KeyError:
            raise ParseError(f"{path}: missing 'sigma'") from None
        except ParseError as exc:
            raise ParseError(f"{path}.sigma: {exc}") from None
        raw = obj.get("weights")
        if not isinstance(raw, list):
            raise ParseError(f"{path}.weights: expected a list")
        if len(raw) != len(sigma):
            raise ParseError(f"{path}.weights: expected {len(sigma)} weights, got {len(raw)}")
        weights = [_weight(w, f"{path}.weights[{i}]") for i, w in enumerate(raw)]
        if sum(weights) > 1:
            raise ParseError(f"{path}.weights: sum {sum(weights)} exceeds 1")
        return StepUp(sigma, weights)
    if kind == "dsum":
        raw = obj.get("parts")
        if not isinstance(raw, list) or not raw:
            raise ParseError(f"{path}.parts: expected a non-empty list")
        parts = []
        for i, item in enumerate(raw):
            sub = f"{path}.parts[{i}]"
            if not isinstance(item, dict):
                raise ParseError(f"{sub}: expected an object")
            parts.append((_weight(item.get("weight"), f"{sub}.weight"),
                          from_json(item.get("permuton"), f"{sub}.permuton", _depth + 1)))
        total = sum(w for w, _ in parts)
        if total > 1:
            raise ParseError(f"{path}.parts: weights sum to {total} > 1")
        return DirectSum(parts)
    raise ParseError(f"{path}.type: unknown permuton type {kind!r}")


# -- sampling ----------------------------------------------------------------

def sample_points(phi: Permuton, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``m`` i.i.d. points from ``phi`` as coordinate arrays ``(x, y)``."""
    if isinstance(phi, Uniform):
        return rng.random(m), rng.random(m)
    if isinstance(phi, Identity):
        x = rng.random(m)
        return x, x.copy()
    if isinstance(phi, Reverse):
        x = rng.random(m)
        return x, 1.0 - x
    if isinstance(phi, StepUp):
        segs = phi.segments()
        x0 = np.array([float(s[0]) for s in segs])
        y0 = np.array([float(s[1]) for s in segs])
        length = np.array([float(s[2]) for s in segs])
        seg = rng.choice(len(segs), size=m, p=length / length.sum())
        u = rng.random(m) * length[seg]
        return x0[seg] + u, y0[seg] + u
    if isinstance(phi, DirectSum):
        blocks = phi.blocks()
        probs = np.array([float(w) for w, _ in blocks])
        label = rng.choice(len(blocks), size=m, p=probs / probs.sum())
        x, y = np.empty(m), np.empty(m)
        offset = 0.0
        for b, (w, part) in enumerate(blocks):
            idx = np.flatnonzero(label == b)
            if idx.size:
                px, py = sample_points(part, idx.size, rng)
                x[idx] = offset + float(w) * px
                y[idx] = offset + float(w) * py
            offset += float(w)
        return x, y
    raise TypeError(f"not a permuton: {phi!r}")


def _ranks(v: np.ndarray) -> np.ndarray:
    return np.argsort(np.argsort(v, axis=-1, kind="stable"), axis=-1, kind="stable")


def _tied(v: np.ndarray) -> np.ndarray:
    """Boolean mask of entries sharing their value with another entry."""
    order = np.argsort(v, kind="stable")
    sv = v[order]
    dup = np.zeros(len(v), dtype=bool)
    eq = sv[1:] == sv[:-1]
    dup[order[1:][eq]] = True
    dup[order[:-1][eq]] = True
    return dup


def sample_permutation(phi: Permuton, n: int, seed=DEFAULT_SEED) -> Permutation:
    """A ``phi``-random permutation of order ``n``; tied coordinates are resampled."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    x, y = sample_points(phi, n, rng)
    while True:
        bad = _tied(x) | _tied(y)
        if not bad.any():
            break
        x[bad], y[bad] = sample_points(phi, int(bad.sum()), rng)
    ys = y[np.argsort(x, kind="stable")]
    return Permutation._trusted(tuple(int(r) + 1 for r in _ranks(ys)))


def sample_patterns(phi: Permuton, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent ``phi``-random permutations of order ``k`` as 0-based rows."""
    x, y = (a.reshape(size, k) for a in sample_points(phi, size * k, rng))
    while True:
        sx, sy = np.sort(x, axis=1), np.sort(y, axis=1)
        bad = ((sx[:, 1:] == sx[:, :-1]).any(axis=1) | (sy[:, 1:] == sy[:, :-1]).any(axis=1))
        if not bad.any():
            break
        rows = np.flatnonzero(bad)
        nx, ny = sample_points(phi, rows.size * k, rng)
        x[rows], y[rows] = nx.reshape(-1, k), ny.reshape(-1, k)
    ys = np.take_along_axis(y, np.argsort(x, axis=1, kind="stable"), axis=1)
    return _ranks(ys)


def pattern_frequencies(phi: Permuton, k: int, samples: int, seed=DEFAULT_SEED,
                        *, threads: int = 1) -> dict[tuple[int, ...], int]:
    """Counts of each order-k pattern among ``samples`` random permutations."""
    codes_base = k ** np.arange(k)

    def work(chunk: int, size: int) -> np.ndarray:
        pats = sample_patterns(phi, k, size, make_rng(seed, 1, chunk))
        return np.bincount(pats @ codes_base, minlength=k ** k)

    total = sum(run_chunks(work, samples, threads))
    out = {}
    for code in np.flatnonzero(total):
        digits = [(int(code) // k ** j) % k + 1 for j in range(k)]
        out[tuple(digits)] = int(total[code])
    return out


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    samples: int


def density_mc(tau, phi: Permuton, samples: int = 1_000_000, seed=DEFAULT_SEED,
               *, threads: int = 1) -> MCEstimate:
    """Empirical frequency of ``tau`` among ``phi``-random permutations of its order."""
    tau = as_perm(tau)
    if samples < 1:
        raise ValueError("samples must be positive")
    freq = pattern_frequencies(phi, len(tau), samples, seed, threads=threads)
    p = freq.get(tau.values, 0) / samples
    return MCEstimate(p, math.sqrt(p * (1 - p) / samples), samples)


def density_mon_mc(tau, phi: Permuton, samples: int = 1_000_000, seed=DEFAULT_SEED,
                   *, threads: int = 1) -> MCEstimate:
    """Direct Monte Carlo of the event that the identity map is a monomorphism."""
    tau = as_perm(tau)
    freq = pattern_frequencies(phi, len(tau), samples, seed, threads=threads)
    hits = sum(c for pat, c in freq.items() if dominates(tau, Permutation._trusted(pat)))
    p = hits / samples
    return MCEstimate(p, math.sqrt(p * (1 - p) / samples), samples)


# -- exact densities ---------------------------------------------------------

@lru_cache(maxsize=None)
def _occurrence_positions(pattern: Permutation, sigma: Permutation) -> tuple[tuple[int, ...], ...]:
    """0-based increasing position tuples of ``sigma`` inducing ``pattern``."""
    v = sigma.values
    return tuple(idx for idx in itertools.combinations(range(len(v)), len(pattern))
                 if Permutation.from_sequence([v[i] for i in idx]) == pattern)


@lru_cache(maxsize=None)
def stepup_terms(tau: Permutation, sigma: Permutation) -> tuple[tuple[Fraction, tuple[int, ...]], ...]:
    """Density of ``tau`` in a step-up over ``sigma`` as a polynomial in segment weights.

    Returns ``(coefficient, exponents)`` pairs; ``exponents`` has one entry per
    segment of ``sigma (+) 1``, the last being the trailing diagonal segment.
    """
    k = len(tau)
    ext = sigma.direct_sum(Permutation.identity(1))
    poly: dict[tuple[int, ...], Fraction] = {}
    for part in enumerate_compressive(tau):
        sizes = part.block_sizes()
        coef = Fraction(math.factorial(k), math.prod(math.factorial(s) for s in sizes))
        for psi in _occurrence_positions(quotient(tau, part), ext):
            expo = [0] * len(ext)
            for pos, s in zip(psi, sizes):
                expo[pos] = s
            key = tuple(expo)
            poly[key] = poly.get(key, 0) + coef
    return tuple((c, e) for e, c in poly.items() if c)


def eval_terms(terms, weights: Sequence):
    total = 0
    for coef, expo in terms:
        term = coef
        for w, e in zip(weights, expo):
            if e:
                term = term * w ** e
        total = total + term
    return total


def _stepup_value(tau: Permutation, sigma: Permutation, weights: Sequence):
    tail = 1 - sum(weights)
    return eval_terms(stepup_terms(tau, sigma), list(weights) + [tail])


def _dsum_value(tau: Permutation, weights: Sequence, leaf: Callable[[int, Permutation], object]):
    """Density of ``tau`` in a direct sum with block weights ``weights``.

    ``leaf(b, beta)`` must return the density of ``beta`` inside block ``b``.
    Points in different blocks always form a direct sum, so ``tau`` splits
    into consecutive runs of its sum components, one run per chosen block.
    """
    comps = tau.components()
    c, k, m = len(comps), len(tau), len(weights)
    sizes = [len(p) for p in comps]

    @lru_cache(maxsize=None)
    def segment(i: int, j: int) -> Permutation:
        out = comps[i]
        for p in comps[i + 1:j]:
            out = out.direct_sum(p)
        return out

    @lru_cache(maxsize=None)
    def cover(i: int, b: int):
        if i == c:
            return 1
        total = 0
        for j in range(i + 1, c + 1):
            beta = segment(i, j)
            s = sum(sizes[i:j])
            for bb in range(b, m):
                d = leaf(bb, beta)
                if d:
                    total = total + weights[bb] ** s * d * cover(j, bb + 1) / math.factorial(s)
        return total

    return math.factorial(k) * cover(0, 0)


@lru_cache(maxsize=65536)
def density_exact(tau, phi: Permuton) -> Fraction:
    """Exact ``t(tau, phi)`` for any pattern and any constructible permuton."""
    tau = as_perm(tau)
    k = len(tau)
    if isinstance(phi, Uniform):
        return Fraction(1, math.factorial(k))
    if isinstance(phi, Identity):
        return Fraction(int(tau == Permutation.identity(k)))
    if isinstance(phi, Reverse):
        return Fraction(int(tau == Permutation.decreasing(k)))
    if isinstance(phi, StepUp):
        return Fraction(_stepup_value(tau, phi.sigma, phi.weights))
    if isinstance(phi, DirectSum):
        blocks = phi.blocks()
        return Fraction(_dsum_value(tau, [w for w, _ in blocks],
                                    lambda b, beta: density_exact(beta, blocks[b][1])))
    raise TypeError(f"not a permuton: {phi!r}")


def _require_indecomposable(tau: Permutation) -> None:
    if len(tau) < 2 or not is_indecomposable(tau):
        raise ContractViolation(f"{tau} must be non-trivial and indecomposable")


def density_stepup(tau, sigma, weights) -> Fraction:
    """``k! * sum over compressive P and occurrences psi of tau/P in sigma``
    of ``prod p_psi(i)^|P_i| / |P_i|!`` for indecomposable ``tau``."""
    tau = as_perm(tau)
    _require_indecomposable(tau)
    phi = StepUp(sigma, weights)
    k, p = len(tau), phi.weights
    tail_pos = len(phi.sigma)
    # a point on the trailing diagonal segment would make tau decomposable
    if any(expo[tail_pos] for _, expo in stepup_terms(tau, phi.sigma)):
        raise InternalConsistencyError(f"{tau} picked up weight from the trailing segment")
    total = Fraction(0)
    for part in enumerate_compressive(tau):
        sizes = part.block_sizes()
        for psi in _occurrence_positions(quotient(tau, part), phi.sigma):
            term = Fraction(1)
            for pos, s in zip(psi, sizes):
                term *= p[pos] ** s / math.factorial(s)
            total += term
    return math.factorial(k) * total


def density_dsum(tau, parts) -> Fraction:
    """``sum_i x_i^k t(tau, phi_i)`` for indecomposable ``tau`` of order k."""
    tau = as_perm(tau)
    _require_indecomposable(tau)
    phi = DirectSum(parts)
    # the identity tail carries no non-trivial indecomposable pattern
    if density_exact(tau, Identity()) != 0:
        raise InternalConsistencyError(f"{tau} has positive density in the identity tail")
    k = len(tau)
    return sum((w ** k * density_exact(tau, part) for w, part in phi.parts), Fraction(0))


def density_mon_permuton(tau, phi: Permuton) -> Fraction:
    """Monomorphism density: sum of ``t(tau', phi)`` over ``tau'`` dominating ``tau``.

    Every pattern dominating an indecomposable one is indecomposable itself,
    so all summands are exact.
    """
    tau = as_perm(tau)
    _require_indecomposable(tau)
    return sum((density_exact(big, phi) for big in permutations_of_order(len(tau))
                if dominates(tau, big)), Fraction(0))


# -- example permutons -------------------------------------------------------

def four_segment_stepup() -> StepUp:
    return StepUp((2, 4, 3, 1), ("1/6", "1/4", "1/12", "1/4"))


def corpus() -> dict[str, Permuton]:
    """Named permutons used by the marginal and Monte Carlo checks."""
    four = four_segment_stepup()
    return {
        "identity": Identity(),
        "reverse": Reverse(),
        "uniform": Uniform(),
        "stepup-2431": four,
        "stepup-21-half": StepUp((2, 1), ("1/2", "1/2")),
        "stepup-full-3142": StepUp((3, 1, 4, 2), ("1/4", "1/4", "1/4", "1/4")),
        "dsum-three": DirectSum([("1/3", four), ("1/6", Uniform()), ("1/4", Reverse())]),
        "dsum-nested": DirectSum([("1/2", DirectSum([("1/3", Reverse()), ("1/3", four)])),
                                  ("1/2", StepUp((2, 3, 1), ("1/5", "2/5", "1/5")))]),
    }
