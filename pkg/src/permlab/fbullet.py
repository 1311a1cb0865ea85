"""The oscillating parameter f, its subsampling tester and forcing experiments.

``f(sigma) = sum_i alpha_i t(tau_i, sigma)`` over a truncated sequence of
patterns with strictly increasing orders.  For each level k >= 2 there is a
pair of permutons (phi_k, phi'_k) that agree on every pattern of order at
most |tau_{k-1}| while ``gamma_k = t(tau_k, phi_k) - t(tau_k, phi'_k) > 0``;
the weights satisfy ``sum alpha < 1/2`` and
``sum_{i>k} alpha_i < alpha_k gamma_k / 4``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ContractViolation, SearchFailure
from .perm import (Permutation, as_perm, density, enumerate_patterns, occurrence_table,
                   permutations_of_order)
from .permuton import (Identity, Permuton, Reverse, StepUp, density_exact, eval_terms,
                       from_json, sample_permutation, stepup_terms, to_json)
from .rng import DEFAULT_SEED, make_rng
from .spectra import borsuk_pair_search

MATCH_TOL = 1e-6


@dataclass(frozen=True)
class FBulletParam:
    taus: tuple[Permutation, ...]
    alphas: tuple[Fraction, ...]
    gammas: tuple[Fraction, ...] | None = None
    pairs: tuple[tuple[Permuton, Permuton], ...] | None = None
    match_residuals: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(as_perm(t) for t in self.taus))
        object.__setattr__(self, "alphas", tuple(Fraction(a) for a in self.alphas))
        if len(self.taus) != len(self.alphas) or not self.taus:
            raise ValueError("need one positive alpha per pattern")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("alphas must be positive")
        if any(len(a) >= len(b) for a, b in zip(self.taus, self.taus[1:])):
            raise ValueError("pattern orders must increase strictly")
        if sum(self.alphas) >= Fraction(1, 2):
            raise ValueError(f"alphas sum to {sum(self.alphas)}, need < 1/2")
        if self.gammas is not None:
            gam = tuple(Fraction(g) for g in self.gammas)
            object.__setattr__(self, "gammas", gam)
            if len(gam) != self.K:
                raise ValueError("need one gamma per pattern")
            for k in range(self.K):
                tail = sum(self.alphas[k + 1:], Fraction(0))
                if tail and not tail < self.alphas[k] * gam[k] / 4:
                    raise ValueError(f"tail after level {k + 1} is {tail}, "
                                     f"need < alpha*gamma/4 = {self.alphas[k] * gam[k] / 4}")

    @property
    def K(self) -> int:
        return len(self.taus)

    def to_json(self) -> dict:
        out = {"taus": [str(t) for t in self.taus], "alphas": [str(a) for a in self.alphas]}
        if self.gammas is not None:
            out["gammas"] = [str(g) for g in self.gammas]
        if self.pairs is not None:
            out["pairs"] = [[to_json(a), to_json(b)] for a, b in self.pairs]
        if self.match_residuals is not None:
            out["match_residuals"] = list(self.match_residuals)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "FBulletParam":
        pairs = obj.get("pairs")
        return cls(
            taus=tuple(Permutation.parse(t) for t in obj["taus"]),
            alphas=tuple(Fraction(a) for a in obj["alphas"]),
            gammas=tuple(Fraction(g) for g in obj["gammas"]) if "gammas" in obj else None,
            pairs=tuple((from_json(a, f"$.pairs[{i}][0]"), from_json(b, f"$.pairs[{i}][1]"))
                        for i, (a, b) in enumerate(pairs)) if pairs else None,
            match_residuals=tuple(obj["match_residuals"]) if "match_residuals" in obj else None,
        )


def f_bullet(param: FBulletParam, sigma) -> Fraction:
    sigma = as_perm(sigma)
    return sum((a * density(t, sigma) for a, t in zip(param.alphas, param.taus)), Fraction(0))


def f_bullet_from_densities(param: FBulletParam, densities: Sequence) -> Fraction:
    """Same sum, fed a precomputed vector ``(t(tau_1, .), ..., t(tau_K, .))``."""
    return sum((a * d for a, d in zip(param.alphas, densities)), Fraction(0))


# -- tester ------------------------------------------------------------------

@dataclass(frozen=True)
class TesterConfig:
    __test__ = False  # keep pytest from collecting it by name

    epsilon: float
    n0: int
    samples: int = 200
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n0 < 1 or self.samples < 1:
            raise ValueError("n0 and samples must be positive")


@dataclass(frozen=True)
class SubsampleReport:
    target: float
    estimate: float
    stderr: float
    error_rate: float
    n0: int
    samples: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def estimate_by_subsampling(param: FBulletParam, sigma, cfg: TesterConfig) -> SubsampleReport:
    """Evaluate f on uniform random ``n0``-point subpatterns of ``sigma``."""
    sigma = as_perm(sigma)
    n = len(sigma)
    if n < cfg.n0:
        raise ContractViolation(f"sigma has order {n} < n0 = {cfg.n0}")
    if cfg.n0 < max(len(t) for t in param.taus):
        raise ContractViolation("n0 must be at least the largest pattern order")
    target = f_bullet(param, sigma)
    rng = make_rng(cfg.seed, 7)
    vals = np.empty(cfg.samples)
    misses = 0
    for rep in range(cfg.samples):
        pos = np.sort(rng.choice(n, size=cfg.n0, replace=False))
        est = f_bullet(param, sigma.restrict(pos.tolist()))
        vals[rep] = float(est)
        misses += abs(target - est) >= Fraction(repr(cfg.epsilon))
    return SubsampleReport(
        target=float(target),
        estimate=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / math.sqrt(cfg.samples)) if cfg.samples > 1 else 0.0,
        error_rate=misses / cfg.samples,
        n0=cfg.n0,
        samples=cfg.samples,
    )


# -- building the oscillating parameter -------------------------------------

def low_order_patterns(m: int) -> list[Permutation]:
    return [p for n in range(1, m + 1) for p in permutations_of_order(n)]


def match_residual(phi: Permuton, phi_prime: Permuton, m: int) -> float:
    """Largest exact density difference over all patterns of order <= m."""
    return max(float(abs(density_exact(p, phi) - density_exact(p, phi_prime)))
               for p in low_order_patterns(m))


def _snap(x: np.ndarray) -> tuple[Fraction, ...]:
    w = [Fraction(float(v)).limit_denominator(10 ** 12) for v in x]
    w = [max(v, Fraction(1, 10 ** 12)) for v in w]
    excess = sum(w) - 1
    if excess > 0:
        i = max(range(len(w)), key=w.__getitem__)
        w[i] -= excess
    return tuple(w)


def _stepup_pair_search(m: int, rng: np.random.Generator, base_pairs: int, starts: int):
    """Maximise ``t(tau, A) - t(tau, B)`` over step-up pairs matching on S_m."""
    targets = list(permutations_of_order(m))[:-1]  # the last is fixed by the sum
    bases = [p for p in enumerate_patterns(m + 1, "indecomposable", nontrivial=True) if len(p) >= m]
    best = None
    for _ in range(base_pairs):
        i, j = rng.choice(len(bases), size=2, replace=False)
        b1, b2 = bases[int(i)], bases[int(j)]
        n1 = len(b1)
        ca = [stepup_terms(r, b1) for r in targets]
        cb = [stepup_terms(r, b2) for r in targets]

        def val(terms, w):
            return eval_terms(terms, list(w) + [1.0 - float(np.sum(w))])

        def eq(x):
            return np.array([val(a, x[:n1]) - val(b, x[n1:]) for a, b in zip(ca, cb)])

        cons = [{"type": "eq", "fun": eq},
                {"type": "ineq", "fun": lambda x: np.array([1 - x[:n1].sum(), 1 - x[n1:].sum()])}]
        for tau in permutations_of_order(m + 1):
            ta, tb = stepup_terms(tau, b1), stepup_terms(tau, b2)
            for _ in range(starts):
                x0 = np.concatenate([rng.dirichlet(np.ones(n1 + 1))[:n1],
                                     rng.dirichlet(np.ones(len(b2) + 1))[:len(b2)]])
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    sol = optimize.minimize(lambda x: val(tb, x[n1:]) - val(ta, x[:n1]), x0,
                                            method="SLSQP", bounds=[(1e-3, 1.0)] * len(x0),
                                            constraints=cons,
                                            options={"ftol": 1e-14, "maxiter": 200})
                x = np.clip(sol.x, 1e-3, 1.0)
                if np.max(np.abs(eq(x))) > 1e-10 or x[:n1].sum() > 1 or x[n1:].sum() > 1:
                    continue
                gain = val(ta, x[:n1]) - val(tb, x[n1:])
                if best is None or gain > best[0]:
                    best = (gain, tau, StepUp(b1, _snap(x[:n1])), StepUp(b2, _snap(x[n1:])))
    if best is None:
        raise SearchFailure(f"no matching step-up pair found for order {m}")
    return best[1], best[2], best[3]


def _borsuk_level(m: int, seed, budget: int):
    targets = list(permutations_of_order(m))[:-1]
    n = m + 1
    while True:
        try:
            pair = borsuk_pair_search(targets, n, seed, budget)
            break
        except ContractViolation:
            n += 1  # not enough thorough indecomposable permutations of this order
    phi, phi_p = pair.permutons()
    if pair.gap < 0:
        phi, phi_p = phi_p, phi
    return pair.family[pair.index], phi, phi_p


def alpha_schedule(gammas: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """``a_1 = 1/4``, ``a_k = min(4^-k, a_{k-1} gamma_{k-1} / 8)``."""
    alphas = [Fraction(1, 4)]
    for k in range(2, len(gammas) + 1):
        alphas.append(min(Fraction(1, 4 ** k), alphas[-1] * gammas[k - 2] / 8))
    return tuple(alphas)


def build_oscillating_param(q_start: int = 2, K: int = 2, seed=DEFAULT_SEED, *,
                            method: str = "optimize", base_pairs: int = 3, starts: int = 2,
                            budget: int = 50) -> FBulletParam:
    """Truncated f with K levels.

    Level 1 is the decreasing pattern of order ``q_start`` with the reverse
    and identity permutons (gamma = 1).  Each later level matches all
    patterns of the previous order: ``method="optimize"`` maximises the gap
    over pairs of step-up permutons under equality constraints, and
    ``method="borsuk"`` uses the antipodal pair search over thorough
    families (valid but with tiny gaps).
    """
    if q_start < 2 or K < 1:
        raise ValueError("need q_start >= 2 and K >= 1")
    if method not in ("optimize", "borsuk"):
        raise ValueError("method must be 'optimize' or 'borsuk'")
    taus = [Permutation.decreasing(q_start)]
    pairs: list[tuple[Permuton, Permuton]] = [(Reverse(), Identity())]
    residuals = [0.0]
    rng = make_rng(seed, 8)
    for _ in range(2, K + 1):
        m = len(taus[-1])
        if method == "optimize":
            tau, phi, phi_p = _stepup_pair_search(m, rng, base_pairs, starts)
        else:
            tau, phi, phi_p = _borsuk_level(m, seed, budget)
        res = match_residual(phi, phi_p, m)
        if res > MATCH_TOL:
            raise SearchFailure(f"level {len(taus) + 1} pair matches only to {res:.3g}",
                                {"residual": res})
        taus.append(tau)
        pairs.append((phi, phi_p))
        residuals.append(res)
    gammas = [density_exact(t, a) - density_exact(t, b) for t, (a, b) in zip(taus, pairs)]
    if any(g <= 0 for g in gammas):
        raise SearchFailure("a level has no positive gap", {"gammas": [float(g) for g in gammas]})
    return FBulletParam(tuple(taus), alpha_schedule(gammas), tuple(gammas), tuple(pairs),
                        tuple(residuals))


# -- forcing-family failure experiment --------------------------------------

def _densities_by_order(sigma: Permutation, orders: Sequence[int]) -> dict:
    out = {}
    n = len(sigma)
    for k in set(orders):
        table = occurrence_table(sigma, k)
        total = math.comb(n, k) if k <= n else 0
        for pat, c in table.items():
            out[pat] = Fraction(c, total) if total else Fraction(0)
    return out


def forcing_failure_experiment(param: FBulletParam, k: int, orders=(200, 500, 1000),
                               seed=DEFAULT_SEED, reps: int = 60) -> dict:
    """Sample level-k permuton pairs at growing orders and measure the gaps.

    For each order, ``reps`` independent pairs (sigma from phi_k, sigma' from
    phi'_k) give the largest low-order density difference (patterns of
    order <= |tau_{k-1}|) and the signed difference ``f(sigma) - f(sigma')``.
    Separation means the mean f-gap at the largest order exceeds
    ``alpha_k gamma_k / 4`` while the mean low-order gap decreases in n.
    """
    if param.pairs is None or param.gammas is None:
        raise ContractViolation("parameter carries no permuton pairs")
    if not 1 <= k <= param.K:
        raise ContractViolation(f"k must lie in 1..{param.K}")
    gamma, alpha = param.gammas[k - 1], param.alphas[k - 1]
    if gamma <= 0:
        raise ContractViolation(f"level {k} has gamma = {gamma}; no separation possible")
    phi, phi_p = param.pairs[k - 1]
    m = len(param.taus[k - 2]) if k >= 2 else 0
    low = [p.values for p in low_order_patterns(m)]
    tau_orders = [len(t) for t in param.taus]
    needed = sorted(set(tau_orders) | set(range(1, m + 1)))
    rows = []
    for oi, n in enumerate(orders):
        low_gaps, f_gaps = [], []
        for rep in range(reps):
            s = sample_permutation(phi, n, make_rng(seed, 9, oi, rep, 0))
            sp = sample_permutation(phi_p, n, make_rng(seed, 9, oi, rep, 1))
            ds, dsp = _densities_by_order(s, needed), _densities_by_order(sp, needed)
            low_gaps.append(max((abs(ds[p] - dsp[p]) for p in low), default=Fraction(0)))
            f_gaps.append(f_bullet_from_densities(param, [ds[t.values] for t in param.taus])
                          - f_bullet_from_densities(param, [dsp[t.values] for t in param.taus]))
        rows.append({
            "n": n,
            "mean_low_order_gap": float(sum(low_gaps) / reps),
            "max_low_order_gap": float(max(low_gaps)),
            "mean_f_gap": float(sum(f_gaps) / reps),
            "min_f_gap": float(min(f_gaps)),
        })
    threshold = alpha * gamma / 4
    decreasing = all(a["mean_low_order_gap"] > b["mean_low_order_gap"] for a, b in zip(rows, rows[1:]))
    separated = rows[-1]["mean_f_gap"] > float(threshold)
    return {
        "k": k,
        "seed": int(seed),
        "reps": reps,
        "alpha_k": str(alpha),
        "gamma_k": str(gamma),
        "expected_f_gap": float(alpha * gamma),
        "threshold": float(threshold),
        "tail_bound": float(alpha * gamma / 2),
        "match_residual": (param.match_residuals or [None] * param.K)[k - 1],
        "orders": rows,
        "low_order_gap_decreasing": decreasing,
        "separated_at_largest": separated,
        "passed": decreasing and separated,
        "note": None if separated else "separation not yet visible at these orders",
    }
