"""Command-line front end: ``permlab <subcommand> [flags]``.

Standard output carries exactly one result document; progress notes go to
standard error.  Exit status is 0 on success, 1 on a usage or input error
and 2 when a search or experiment fails (the diagnostic payload is still
printed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Any, Callable

from . import __version__
from .compressive import enumerate_compressive, quotient
from .errors import ParseError, PermlabError, SearchFailure
from .fbullet import (FBulletParam, TesterConfig, build_oscillating_param, estimate_by_subsampling,
                      f_bullet, forcing_failure_experiment)
from .perm import (Permutation, canonical_patterns, count_patterns, density, density_hom,
                   density_mon, enumerate_patterns, sample_uniform_statistics)
from .permuton import (DirectSum, Permuton, corpus, density_dsum, density_exact,
                       density_mc, density_mon_mc, density_stepup, from_json, sample_permutation,
                       to_fraction, to_json)
from .rng import DEFAULT_SEED
from .spectra import (borsuk_pair_search, certify_interior_point, density_vector,
                      finite_difference_error, find_spanning_system, jacobian, mon_matrix,
                      transform_vector)

SCHEMA = "permuton-lab/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


# -- argument types ----------------------------------------------------------

def _perm(text: str) -> Permutation:
    try:
        return Permutation.parse(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _perm_list(text: str) -> list[Permutation]:
    return [_perm(t) for t in text.split(";") if t.strip()]


def _fractions(text: str) -> list[Fraction]:
    try:
        return [to_fraction(t.strip()) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError, ParseError) as exc:
        raise argparse.ArgumentTypeError(f"bad rational list {text!r}: {exc}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _json_arg(text: str) -> Any:
    """Inline JSON, ``@path`` or a plain existing path."""
    path = text[1:] if text.startswith("@") else text
    if text.startswith("@") or os.path.exists(path):
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        except OSError as exc:
            raise argparse.ArgumentTypeError(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON ({exc.msg} at column {exc.colno})") from None


def _permuton(text: str) -> Permuton:
    named = corpus()
    if text in named:
        return named[text]
    try:
        return from_json(_json_arg(text))
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- output ------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, Permutation):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, dict) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, list) and any(isinstance(v, list) for v in obj):
        yield prefix, json.dumps(obj, separators=(",", ":"))
    elif isinstance(obj, list):
        yield prefix, " ".join(str(v) for v in obj)
    else:
        yield prefix, obj


def _table(rows: list[dict]) -> list[str]:
    cols = list(rows[0])
    return ["\t".join(cols)] + ["\t".join(str(r.get(c, "")) for c in cols) for r in rows]


def render(doc: dict, fmt: str) -> str:
    """Serialise a result document; tsv and human forms are derived from the JSON."""
    if fmt == "json":
        return json.dumps(doc, indent=2)
    tables = {k: v for k, v in doc.items()
              if isinstance(v, list) and v and all(isinstance(r, dict) for r in v)
              and all(not isinstance(x, (dict, list)) for r in v for x in r.values())}
    scalars = {k: v for k, v in doc.items() if k not in tables}
    if fmt == "tsv":
        lines = [f"{k}\t{v}" for k, v in _flatten(scalars)]
        for name, rows in tables.items():
            lines += ["", f"# {name}"] + _table(rows)
        return "\n".join(lines)
    width = max((len(k) for k, _ in _flatten(scalars)), default=0)
    lines = [f"{k.ljust(width)}  {v}" for k, v in _flatten(scalars)]
    for name, rows in tables.items():
        lines += ["", f"{name}:"] + ["  " + line.replace("\t", "  ") for line in _table(rows)]
    return "\n".join(lines)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# -- subcommands -------------------------------------------------------------

def cmd_count(a):
    c = count_patterns(a.pattern, getattr(a, "in"), method=a.method)
    return {"pattern": a.pattern, "in": getattr(a, "in"), "occ": c.occ, "mon": c.mon, "hom": c.hom}


def cmd_density(a):
    fn = {"occurrence": density, "monomorphism": density_mon, "homomorphism": density_hom}[a.kind]
    val = fn(a.pattern, getattr(a, "in"))
    return {"pattern": a.pattern, "in": getattr(a, "in"), "kind": a.kind, "value": val,
            "float": float(val)}


def cmd_enumerate(a):
    if a.predicate == "canonical":
        pats = canonical_patterns(a.order, cap=a.cap)
    else:
        pats = enumerate_patterns(a.order, a.predicate, nontrivial=a.nontrivial, cap=a.cap)
        if a.exact_order:
            pats = [p for p in pats if len(p) == a.order]
    return {"order": a.order, "predicate": a.predicate, "count": len(pats), "patterns": pats}


def cmd_compress(a):
    parts = enumerate_compressive(a.tau)
    return {"tau": a.tau, "count": len(parts), "partitions": [
        {"blocks": p.as_lists(), "shifts": list(p.shifts), "quotient": quotient(a.tau, p)}
        for p in parts]}


def cmd_sample(a):
    out = []
    for i in range(a.count):
        if a.count > 1:
            _note(f"sample {i + 1}/{a.count}")
        out.append(sample_permutation(a.permuton, a.n, a.seed + i))
    return {"permuton": to_json(a.permuton), "n": a.n, "seed": a.seed, "permutations": out}


def cmd_stepup_density(a):
    val = density_stepup(a.tau, a.sigma, a.weights)
    return {"tau": a.tau, "sigma": a.sigma, "weights": a.weights, "value": val, "float": float(val)}


def cmd_dsum_density(a):
    if not isinstance(a.permuton, DirectSum):
        raise UsageError("dsum-density: --permuton must be a direct sum")
    val = density_dsum(a.tau, a.permuton.parts)
    return {"tau": a.tau, "permuton": to_json(a.permuton), "value": val, "float": float(val)}


def cmd_mc_density(a):
    fn = density_mc if a.kind == "occurrence" else density_mon_mc
    est = fn(a.tau, a.permuton, a.samples, a.seed, threads=a.threads)
    out = {"tau": a.tau, "permuton": to_json(a.permuton), "kind": a.kind, "seed": a.seed,
           "samples": est.samples, "estimate": est.value, "stderr": est.stderr}
    if a.kind == "occurrence":
        exact = density_exact(a.tau, a.permuton)
        out["exact"] = exact
        out["z_score"] = (est.value - float(exact)) / est.stderr if est.stderr else None
    return out


def cmd_matrix(a):
    m = mon_matrix(a.q)
    return {"q": a.q, "patterns": m.patterns, "entries": [list(r) for r in m.entries],
            "det": m.det(), "unit_upper_triangular": m.is_unit_upper_triangular()}


def cmd_vector(a):
    if (a.perm is None) == (a.permuton is None):
        raise UsageError("vector: give exactly one of --in or --permuton")
    obj = a.perm if a.perm is not None else a.permuton
    v = density_vector(obj, a.q, a.kind, method=a.method, samples=a.samples, seed=a.seed)
    out = v.to_json()
    if a.transform:
        out["transformed"] = transform_vector(v, a.transform).to_json()
    return out


def cmd_span(a):
    return find_spanning_system(a.q, a.seed, a.max_attempts).to_json()


def cmd_jacobian(a):
    system = find_spanning_system(a.q, a.seed)
    if len(a.x) != len(system.V):
        raise UsageError(f"jacobian: --x needs {len(system.V)} values for q={a.q}")
    jac = jacobian(system, a.x)
    return {"q": a.q, "x": a.x, "matrix": [list(r) for r in jac.matrix], "det": jac.det,
            "finite_difference_max_rel_error": finite_difference_error(system, a.x)}


def cmd_certify(a):
    return certify_interior_point(a.q, a.seed, a.budget).to_json()


def cmd_borsuk(a):
    pair = borsuk_pair_search(a.targets, a.n, a.seed, a.budget, tol=a.tol)
    doc = pair.to_json()
    if not pair.converged:
        raise SearchFailure(f"pair search stopped at residual {pair.residual:.3g}", doc)
    return doc


def _load_param(a) -> FBulletParam:
    if a.param is not None:
        doc = a.param.get("param", a.param) if isinstance(a.param, dict) else a.param
        try:
            return FBulletParam.from_json(doc)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"--param: missing or malformed field {exc}") from None
    _note(f"building parameter with K={a.K} by {a.method}")
    return build_oscillating_param(a.q_start, a.K, a.seed, method=a.method)


def cmd_fbullet(a):
    param = _load_param(a)
    out = {"param": param.to_json()}
    if a.perm is not None:
        val = f_bullet(param, a.perm)
        out["in"] = a.perm
        out["value"] = val
        out["float"] = float(val)
    return out


def cmd_tester(a):
    param = _load_param(a)
    rep = estimate_by_subsampling(param, a.perm, TesterConfig(a.epsilon, a.n0, a.samples, a.seed))
    return {"param": param.to_json(), "epsilon": a.epsilon, **rep.to_json()}


def cmd_forcing(a):
    param = _load_param(a)
    _note(f"forcing experiment at level {a.k}, orders {a.orders}, {a.reps} pairs per order")
    rep = forcing_failure_experiment(param, a.k, a.orders, a.seed, a.reps)
    rep["param"] = param.to_json()
    if not rep["passed"]:
        raise SearchFailure("separation trend not observed", rep)
    return rep


def cmd_stats(a):
    return sample_uniform_statistics(a.n, a.samples, a.seed, threads=a.threads)


# -- parser ------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--format", choices=("json", "tsv", "human"), default="json")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for sampling; results do not depend on it")
    return p


def _param_flags(p):
    p.add_argument("--param", type=_json_arg, help="parameter JSON (inline, @file or path); "
                   "built from scratch when omitted")
    p.add_argument("--K", type=int, default=2, help="number of levels when building")
    p.add_argument("--q-start", type=int, default=2, help="order of the first pattern")
    p.add_argument("--method", choices=("optimize", "borsuk"), default="optimize",
                   help="how later-level permuton pairs are found")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="permlab", description="Pattern densities of permutations and permutons.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, fn: Callable, help_text: str):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=fn)
        return p

    p = add("count", cmd_count, "Count occurrences, monomorphisms and homomorphisms of a pattern; "
            "homomorphisms are non-decreasing index maps keeping every inversion of the pattern.")
    p.add_argument("--pattern", type=_perm, required=True)
    p.add_argument("--in", type=_perm, required=True, help="host permutation")
    p.add_argument("--method", choices=("auto", "backtrack", "tables"), default="auto")

    p = add("density", cmd_density, "Exact rational pattern density in a permutation "
            "(occurrences over C(n,k), monomorphisms over C(n,k), homomorphisms over C(n+k-1,k)).")
    p.add_argument("--pattern", type=_perm, required=True)
    p.add_argument("--in", type=_perm, required=True)
    p.add_argument("--kind", choices=("occurrence", "monomorphism", "homomorphism"), default="occurrence")

    p = add("enumerate", cmd_enumerate, "List permutations of order up to q satisfying a predicate, "
            "in canonical order (inversions, order, one-line notation).")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--predicate", default="canonical",
                   choices=("canonical", "all", "indecomposable", "simple", "thorough"))
    p.add_argument("--nontrivial", action="store_true", help="drop the order-1 permutation")
    p.add_argument("--exact-order", action="store_true", help="keep only order exactly q")
    p.add_argument("--cap", type=int, default=8, help="largest order allowed")

    p = add("compress", cmd_compress, "All partitions of a pattern into consecutive blocks that the "
            "pattern shifts rigidly, with the quotient pattern of each.")
    p.add_argument("--tau", type=_perm, required=True)

    p = add("sample", cmd_sample, "Random permutations drawn from a permuton (seeds seed, seed+1, ...).")
    p.add_argument("--permuton", type=_permuton, required=True,
                   help="permuton JSON (inline, @file or path) or a corpus name")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)

    p = add("stepup-density", cmd_stepup_density, "Exact density of an indecomposable pattern in a "
            "step-up permuton, summed over compressive partitions and quotient occurrences.")
    p.add_argument("--tau", type=_perm, required=True)
    p.add_argument("--sigma", type=_perm, required=True)
    p.add_argument("--weights", type=_fractions, required=True, help="comma-separated rationals")

    p = add("dsum-density", cmd_dsum_density, "Exact density of an indecomposable pattern in a "
            "direct sum: weighted sum of the part densities.")
    p.add_argument("--tau", type=_perm, required=True)
    p.add_argument("--permuton", type=_permuton, required=True)

    p = add("mc-density", cmd_mc_density, "Monte Carlo pattern density in a permuton with standard "
            "error, compared against the exact value.")
    p.add_argument("--tau", type=_perm, required=True)
    p.add_argument("--permuton", type=_permuton, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--kind", choices=("occurrence", "monomorphism"), default="occurrence")

    p = add("matrix", cmd_matrix, "Matrix converting occurrence densities of indecomposable patterns "
            "into monomorphism densities (unit upper triangular).")
    p.add_argument("--q", type=int, required=True)

    p = add("vector", cmd_vector, "Density vector over all non-trivial indecomposable patterns of "
            "order up to q, for a permutation or a permuton.")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--in", dest="perm", type=_perm)
    p.add_argument("--permuton", type=_permuton)
    p.add_argument("--kind", choices=("occurrence", "monomorphism", "homomorphism"), default="occurrence")
    p.add_argument("--method", choices=("exact", "mc"), default="exact")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--transform", choices=("occ->mon", "mon->occ"))

    p = add("span", cmd_span, "Step-up permutons whose density vectors have an exactly "
            "non-singular matrix.")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--max-attempts", type=int, default=50)

    p = add("jacobian", cmd_jacobian, "Exact Jacobian of the weighted direct-sum density map at x, "
            "checked against central finite differences.")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--x", type=_fractions, required=True)

    p = add("certify", cmd_certify, "Rational point with exactly non-zero Jacobian determinant, "
            "witnessing an open set of achievable density vectors.")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--budget", type=int, default=1000)

    p = add("borsuk", cmd_borsuk, "Antipodal weight vectors of a thorough family on which every "
            "target density agrees.")
    p.add_argument("--targets", type=_perm_list, required=True, help="semicolon-separated patterns")
    p.add_argument("--n", type=int, required=True, help="order of the family permutations")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-8)

    p = add("fbullet", cmd_fbullet, "Build (or load) the weighted pattern series f and optionally "
            "evaluate it on a permutation.")
    _param_flags(p)
    p.add_argument("--in", dest="perm", type=_perm)

    p = add("tester", cmd_tester, "Estimate f on random subpatterns of a permutation and report the "
            "rate of estimates off by at least epsilon.")
    _param_flags(p)
    p.add_argument("--in", dest="perm", type=_perm, required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--samples", type=int, default=200)

    p = add("forcing", cmd_forcing, "Sample permutation pairs from a level's permuton pair at growing "
            "orders: low-order densities converge while f stays separated.")
    _param_flags(p)
    p.add_argument("--k", type=int, default=2, help="level")
    p.add_argument("--orders", type=_ints, default=[200, 500, 1000])
    p.add_argument("--reps", type=int, default=60)

    p = add("stats", cmd_stats, "Fractions of indecomposable and simple permutations among uniform "
            "random permutations of order n.")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    return parser


def _emit(doc: dict, command: str, fmt: str) -> None:
    full = {"schema": SCHEMA, "command": command, **_plain(doc)}
    sys.stdout.write(render(full, fmt) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    fmt = "json"
    try:
        args = parser.parse_args(argv)
        fmt = args.format
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        doc = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SearchFailure as exc:
        print(f"search failed: {exc}", file=sys.stderr)
        _emit({"error": str(exc), "payload": exc.payload}, args.command, fmt)
        return 2
    except (PermlabError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(doc, args.command, fmt)
    return 0


if __name__ == "__main__":
    sys.exit(main())
