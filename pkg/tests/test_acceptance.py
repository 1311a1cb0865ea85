"""Acceptance gate: one test per criterion, each reporting a pass/fail line."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np

from naive import naive_counts
from permlab import (Permutation, StepUp, build_oscillating_param, certify_interior_point,
                     count_patterns, density_dsum, density_stepup, f_bullet,
                     finite_difference_error, forcing_failure_experiment, jacobian, mon_matrix,
                     pattern_frequencies, sample_points, sample_uniform_statistics, transform_vector)
from permlab.perm import canonical_patterns, density, is_indecomposable, permutations_of_order
from permlab.permuton import corpus
from permlab.rng import DEFAULT_SEED, make_rng
from permlab.spectra import DensityVector, family_permuton, thorough_density, thorough_family


def test_criterion_01_oracle_equivalence(report):
    start = time.perf_counter()
    mismatches, checked = [], 0
    for n in range(1, 7):
        for sigma in itertools.permutations(range(1, n + 1)):
            for k in range(1, 5):
                for pi in itertools.permutations(range(1, k + 1)):
                    c = count_patterns(pi, sigma)
                    checked += 1
                    if (c.occ, c.mon, c.hom) != naive_counts(pi, sigma):
                        mismatches.append((pi, sigma))
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 60
    report(1, ok, f"{checked} (pattern, host) pairs, {len(mismatches)} mismatches, {elapsed:.1f}s")
    assert ok, mismatches[:5]


def test_criterion_02_simple_fraction(report):
    start = time.perf_counter()
    s = sample_uniform_statistics(200, 100_000, seed=DEFAULT_SEED)
    elapsed = time.perf_counter() - start
    gap = abs(s["fraction_simple"] - math.exp(-2))
    ok = gap <= 0.01 and elapsed < 300
    report(2, ok, f"fraction simple {s['fraction_simple']:.4f} vs e^-2 {math.exp(-2):.4f}, "
                  f"gap {gap:.4f}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_decomposable_bound(report):
    n, samples = 100, 100_000
    s = sample_uniform_statistics(n, samples, seed=DEFAULT_SEED)
    bound = 2 / n + (n - 3) * 2 / (n * (n - 1))
    se = math.sqrt(bound * (1 - bound) / samples)
    frac = 1 - s["fraction_indecomposable"]
    ok = frac <= bound + 3 * se
    report(3, ok, f"non-indecomposable fraction {frac:.4f} <= {bound:.4f} + 3*{se:.4f}")
    assert ok


def _random_stepups(count, seed):
    rng = make_rng(seed, 100)
    out = []
    for _ in range(count):
        m = int(rng.integers(2, 5))
        sigma = Permutation.from_sequence(rng.permutation(m))
        nums = [int(a) for a in rng.integers(1, 10, m)]
        denom = sum(nums) + int(rng.integers(0, 10))
        out.append(StepUp(sigma, [Fraction(a, denom) for a in nums]))
    return out


def test_criterion_04_stepup_vs_monte_carlo(report):
    samples = 1_000_000
    worst, failures, checks = 0.0, [], 0
    for idx, phi in enumerate(_random_stepups(10, DEFAULT_SEED)):
        for k in (2, 3, 4):
            freq = pattern_frequencies(phi, k, samples, seed=DEFAULT_SEED + idx)
            for tau in permutations_of_order(k):
                if not is_indecomposable(tau):
                    continue
                exact = float(density_stepup(tau, phi.sigma, phi.weights))
                est = freq.get(tau.values, 0) / samples
                se = math.sqrt(exact * (1 - exact) / samples)
                checks += 1
                z = abs(est - exact) / se if se else (0.0 if est == exact else math.inf)
                worst = max(worst, z)
                if not abs(est - exact) <= 4 * se:
                    failures.append((idx, str(tau), exact, est))
    ok = not failures
    report(4, ok, f"{checks} comparisons over 10 step-ups, worst |z| {worst:.2f}, {len(failures)} beyond 4 SE")
    assert ok, failures


def test_criterion_05_monomorphism_matrix(report):
    rng = make_rng(DEFAULT_SEED, 105)
    triangular = all(mon_matrix(q).is_unit_upper_triangular() and mon_matrix(q).det() == 1
                     for q in (2, 3, 4))
    trips = 0
    round_trip = True
    for q in (2, 3, 4):
        r = len(canonical_patterns(q))
        for _ in range(100):
            vals = tuple(Fraction(int(a), int(b)) for a, b in zip(rng.integers(-99, 100, r), rng.integers(1, 100, r)))
            v = DensityVector(q, "occurrence", vals)
            back = transform_vector(transform_vector(v, "occ->mon"), "mon->occ")
            round_trip &= back.values == vals
            trips += 1
    ok = triangular and round_trip
    report(5, ok, f"unit upper triangular for q=2,3,4: {triangular}; {trips} exact round trips: {round_trip}")
    assert ok


def test_criterion_06_interior_witness(report):
    start = time.perf_counter()
    details, ok = [], True
    for q in (2, 3):
        wit = certify_interior_point(q, seed=DEFAULT_SEED)
        again = certify_interior_point(q, seed=DEFAULT_SEED)
        exact_det = jacobian(wit.system, wit.x).det
        fd = finite_difference_error(wit.system, [float(v) for v in wit.x])
        good = (isinstance(exact_det, Fraction) and exact_det != 0 and exact_det == wit.det
                and fd < 1e-5 and again.to_json() == wit.to_json())
        ok &= good
        details.append(f"q={q} det {float(wit.det):.3e} fd err {fd:.1e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    report(6, ok, "; ".join(details) + f"; reproducible; {elapsed:.1f}s")
    assert ok


def test_criterion_07_thorough_block_density(report):
    rng = make_rng(DEFAULT_SEED, 107)
    checks, bad = 0, []
    for n in range(2, 7):
        pool = [p for p in permutations_of_order(n)
                if is_indecomposable(p) and all(p[i + 1] != p[i] + 1 for i in range(n - 1))]
        size = min(3, len(pool))
        fam = thorough_family(size, n, seed=DEFAULT_SEED)
        for _ in range(20):
            nums = [int(a) for a in rng.integers(1, 20, size)]
            denom = sum(nums) + int(rng.integers(0, 20))
            u = [Fraction(a, denom) for a in nums]
            phi = family_permuton(fam, n, u)
            for p, ui in zip(fam, u):
                checks += 1
                if density_dsum(p, phi.parts) != thorough_density(n, ui):
                    bad.append((n, str(p), ui))
    ok = not bad
    report(7, ok, f"{checks} exact comparisons for orders 2..6, {len(bad)} mismatches")
    assert ok, bad[:5]


def test_criterion_08_approximation_chain(report):
    param = build_oscillating_param(seed=DEFAULT_SEED)
    rng = make_rng(DEFAULT_SEED, 108)
    cases, bad = 0, []
    for k in range(1, param.K + 1):
        low = [p for m in range(1, len(param.taus[k - 1]) + 1) for p in permutations_of_order(m)]
        tail = sum(param.alphas[k:], Fraction(0))
        for _ in range(50):
            n = int(rng.integers(10, 60))
            sigma = Permutation.from_sequence(rng.permutation(n))
            vals = list(sigma.values)
            for _ in range(int(rng.integers(1, 4))):
                i = int(rng.integers(0, n - 1))
                vals[i], vals[i + 1] = vals[i + 1], vals[i]
            pi = Permutation(vals)
            delta = max(abs(density(t, sigma) - density(t, pi)) for t in low) or Fraction(1, 10 ** 12)
            lhs = abs(f_bullet(param, sigma) - f_bullet(param, pi))
            cases += 1
            if not lhs < delta / 2 + tail:
                bad.append((k, str(sigma), str(pi)))
    ok = not bad
    report(8, ok, f"{cases} close pairs (50 per level, K={param.K}), {len(bad)} violations")
    assert ok, bad[:3]


def test_criterion_09_forcing_separation(report):
    param = build_oscillating_param(seed=DEFAULT_SEED)
    k = 2
    passed, rows = 0, []
    for seed in range(10):
        rep = forcing_failure_experiment(param, k, orders=(200, 500, 1000), seed=seed)
        passed += rep["passed"]
        last = rep["orders"][-1]
        rows.append(f"{seed}:{'ok' if rep['passed'] else 'no'}({last['mean_f_gap']:.4f})")
    ok = passed >= 8
    report(9, ok, f"{passed}/10 seeds separate at level {k}; threshold {rep['threshold']:.4f}; "
                  f"gamma {float(param.gammas[k - 1]):.3f}; " + " ".join(rows))
    assert ok


def test_criterion_10_uniform_marginals(report):
    worst, bad = 0.0, []
    for idx, (name, phi) in enumerate(corpus().items()):
        x, y = sample_points(phi, 100_000, make_rng(DEFAULT_SEED, 110, idx))
        for coord in (x, y):
            hist = np.histogram(coord, bins=20, range=(0.0, 1.0))[0] / coord.size
            dev = float(np.max(np.abs(hist - 0.05)))
            worst = max(worst, dev)
            if not dev < 0.02:
                bad.append(name)
    ok = not bad
    report(10, ok, f"{len(corpus())} corpus permutons, worst bin deviation {worst:.4f}")
    assert ok, bad
