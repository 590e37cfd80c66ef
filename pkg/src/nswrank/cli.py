"""Command-line surface: generate, solve, evaluate, decompose, sample, sweep.

Exit codes: 0 success, 2 bad flags or config, 3 unreadable/unwritable or
malformed files, 4 solver finished without reaching its gap target (policy is
still written), 5 infeasible or degenerate program, 6 dimension mismatch,
7 decomposition matching failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys

import numpy as np

from . import io as nio
from .core import ExposureModel, ImpactFunction, PolicyTensor, user_utility
from .bvn import bvn_decompose, reconstruct, sample_ranking
from .errors import (
    DegenerateMarketError,
    DimensionError,
    InfeasibleError,
    MatchingFailure,
    NotDoublyStochastic,
    ParseError,
    SchemaError,
    ZeroMeritError,
)
from .metrics import fairness_report
from .solvers import (
    LinkFunction,
    NswConfig,
    SolveDiagnostics,
    solve_expo_fair,
    solve_nsw,
    solve_uniform,
    solve_utility_max,
)
from .synth import SyntheticConfig, generate_market

_EXPOSURE_KINDS = ("inverse", "exponential", "dcg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nswrank",
        description="Fair stochastic ranking policies for two-sided markets")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic relevance matrices")
    g.add_argument("--users", type=int, default=100)
    g.add_argument("--items", type=int, default=50)
    g.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="popularity-bias mix in [0, 1]")
    g.add_argument("--noise", type=float, default=0.05,
                   help="half-width of the uniform prediction noise")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-true", required=True)
    g.add_argument("--out-pred", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="compute a ranking policy")
    s.add_argument("--policy", required=True,
                   choices=["max", "uniform", "expo-fair", "nsw"])
    s.add_argument("--alpha", type=float, default=0.0,
                   help="merit weight exponent for the nsw policy")
    s.add_argument("--relevance", required=True)
    s.add_argument("--exposure", choices=_EXPOSURE_KINDS, default="inverse")
    s.add_argument("--cutoff", type=int, default=5)
    s.add_argument("--link", choices=["identity"], default="identity")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iters", type=int, default=10000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="audit a policy against ground truth")
    e.add_argument("--policy", required=True, help="policy JSON path")
    e.add_argument("--relevance", required=True, help="ground-truth relevance CSV")
    e.add_argument("--exposure", choices=_EXPOSURE_KINDS, default="inverse")
    e.add_argument("--cutoff", type=int, default=5)
    e.add_argument("--impact", choices=["relevance", "exposure"],
                   default="relevance")
    e.add_argument("--out-json", required=True)
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("decompose", help="decompose a policy into rankings")
    d.add_argument("--policy", required=True)
    d.add_argument("--epsilon", type=float, default=1e-9)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decompose)

    sm = sub.add_parser("sample", help="draw one ranking from a decomposition")
    sm.add_argument("--decomposition", required=True)
    sm.add_argument("--user", type=int, required=True)
    sm.add_argument("--seed", type=int, required=True)
    sm.set_defaults(func=cmd_sample)

    sw = sub.add_parser("sweep", help="run a seeded experiment grid")
    sw.add_argument("--config", required=True, help="sweep config JSON")
    sw.add_argument("--out", required=True, help="output CSV")
    sw.add_argument("--parallel", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return parser


def cmd_generate(args) -> int:
    cfg = SyntheticConfig(m=args.users, n=args.items, lam=args.lam,
                          noise_c=args.noise, seed=args.seed)
    rel_true, rel_pred = generate_market(cfg)
    nio.save_relevance(rel_true, args.out_true)
    nio.save_relevance(rel_pred, args.out_pred)
    return 0


def _solve_one(kind: str, rel, exp, alpha: float, tol: float, max_iters: int):
    """Returns (policy, diagnostics, converged)."""
    if kind == "uniform":
        policy = solve_uniform(rel.m, rel.n)
    elif kind == "max":
        policy = solve_utility_max(rel, exp)
    elif kind == "expo-fair":
        policy, diag = solve_expo_fair(rel, exp, LinkFunction())
        return policy, diag, True
    elif kind == "nsw":
        cfg = NswConfig(alpha=alpha, max_iters=max_iters, rel_gap_tol=tol)
        policy, diag = solve_nsw(rel, exp, cfg)
        converged = diag.duality_gap <= tol * max(abs(diag.objective_value), 1e-300)
        return policy, diag, converged
    else:
        raise ValueError(f"unknown policy {kind!r}")
    diag = SolveDiagnostics(objective_value=user_utility(policy, rel, exp))
    return policy, diag, True


def cmd_solve(args) -> int:
    rel = nio.load_relevance(args.relevance)
    exp = ExposureModel.make(args.exposure, rel.n, args.cutoff)
    policy, diag, converged = _solve_one(
        args.policy, rel, exp, args.alpha, args.tol, args.max_iters)
    alpha = args.alpha if args.policy == "nsw" else None
    nio.save_policy(args.out, policy, args.policy, args.exposure, args.cutoff,
                    diagnostics=diag, alpha=alpha)
    if not converged:
        print(f"gap target not met after {diag.iterations} iterations "
              f"(gap {diag.duality_gap:.3e})", file=sys.stderr)
        return 4
    return 0


def cmd_evaluate(args) -> int:
    doc = nio.load_policy(args.policy)
    rel = nio.load_relevance(args.relevance)
    exp = ExposureModel.make(args.exposure, rel.n, args.cutoff)
    policy: PolicyTensor = doc["policy"]
    if (policy.m, policy.n) != (rel.m, rel.n):
        raise DimensionError(
            f"policy is {policy.m} x {policy.n}, relevance is {rel.m} x {rel.n}")
    vfn = (ImpactFunction.RELEVANCE_WEIGHTED if args.impact == "relevance"
           else ImpactFunction.EXPOSURE_ONLY)
    report = fairness_report(policy, rel, exp, vfn)
    nio.save_metrics(args.out_json, report)
    return 0


def cmd_decompose(args) -> int:
    doc = nio.load_policy(args.policy)
    policy: PolicyTensor = doc["policy"]
    dec = bvn_decompose(policy, epsilon=args.epsilon)
    nio.save_decomposition(args.out, dec)
    err = float(np.abs(reconstruct(dec).matrices - policy.matrices).max())
    print(f"reconstruction_error={err:.3e}")
    return 0


def cmd_sample(args) -> int:
    dec = nio.load_decomposition(args.decomposition)
    ranking = sample_ranking(dec, args.user, args.seed)
    print(" ".join(f"{rank + 1},{item}" for rank, item in enumerate(ranking)))
    return 0


# ------------------------------------------------------------------- sweep


_POLICY_CHOICES = ("max", "uniform", "expo-fair", "nsw")


def _parse_sweep_config(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ValueError("sweep config must be a JSON object")
    policies = []
    for entry in doc.get("policies", []):
        if isinstance(entry, str):
            if entry not in _POLICY_CHOICES:
                raise ValueError(f"unknown policy {entry!r}")
            policies.append((entry, entry, 0.0))
        elif isinstance(entry, dict) and set(entry) == {"alpha-nsw"}:
            for alpha in entry["alpha-nsw"]:
                alpha = float(alpha)
                name = "nsw" if alpha == 0.0 else f"nsw-a{alpha:g}"
                policies.append((name, "nsw", alpha))
        else:
            raise ValueError(f"bad policy entry {entry!r}")
    grid_doc = doc.get("grid", {})
    grid = {
        "lambda": [float(v) for v in grid_doc.get("lambda", [0.5])],
        "noise_c": [float(v) for v in grid_doc.get("noise_c", [0.05])],
        "k": [int(v) for v in grid_doc.get("k", [5])],
        "n_items": [int(v) for v in grid_doc.get("n_items", [50])],
    }
    if not policies or not all(grid.values()):
        raise ValueError("sweep config needs a nonempty policy list and grid")
    exposure = doc.get("exposure", "inverse")
    if exposure not in _EXPOSURE_KINDS:
        raise ValueError(f"unknown exposure kind {exposure!r}")
    return {
        "policies": policies,
        "grid": grid,
        "seeds": int(doc.get("seeds", 10)),
        "users": int(doc.get("users", 100)),
        "exposure": exposure,
        "tol": float(doc.get("tol", 1e-6)),
        "max_iters": int(doc.get("max_iters", 10000)),
    }


def _sweep_unit(task: tuple) -> list:
    """Solve every policy for one (grid point, seed); returns finished rows."""
    (lam, noise_c, k, n_items, seed, users, exposure_kind, policies,
     tol, max_iters) = task
    rows = []
    try:
        rel_true, rel_pred = generate_market(SyntheticConfig(
            m=users, n=n_items, lam=lam, noise_c=noise_c, seed=seed))
        exp = ExposureModel.make(exposure_kind, n_items, k)
    except Exception:
        for name, _, _ in policies:
            rows.append(nio.format_sweep_row(name, lam, noise_c, k, n_items,
                                             seed, "error"))
        return rows
    for name, kind, alpha in policies:
        try:
            policy, _, _ = _solve_one(kind, rel_pred, exp, alpha, tol, max_iters)
            report = fairness_report(policy, rel_true, exp)
            values = (report.user_utility, report.mean_max_envy,
                      report.pct_improved_10, report.pct_decreased_10)
            rows.append(nio.format_sweep_row(name, lam, noise_c, k, n_items,
                                             seed, values))
        except Exception:
            rows.append(nio.format_sweep_row(name, lam, noise_c, k, n_items,
                                             seed, "error"))
    return rows


def cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = _parse_sweep_config(json.load(fh))
    grid = cfg["grid"]
    tasks = []
    for lam in sorted(grid["lambda"]):
        for noise_c in sorted(grid["noise_c"]):
            for k in sorted(grid["k"]):
                for n_items in sorted(grid["n_items"]):
                    for seed in range(cfg["seeds"]):
                        tasks.append((lam, noise_c, k, n_items, seed,
                                      cfg["users"], cfg["exposure"],
                                      tuple(cfg["policies"]), cfg["tol"],
                                      cfg["max_iters"]))
    if args.parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(args.parallel) as pool:
            per_task = list(pool.map(_sweep_unit, tasks))
    else:
        per_task = [_sweep_unit(t) for t in tasks]

    # rows are emitted per grid point in policy order, seeds innermost;
    # regroup so the order is grid point, policy, seed
    n_pol = len(cfg["policies"])
    seeds = cfg["seeds"]
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(nio.SWEEP_HEADER + "\n")
        for point in range(0, len(tasks), seeds):
            for p in range(n_pol):
                for s in range(seeds):
                    fh.write(per_task[point + s][p] + "\n")
    return 0


# ------------------------------------------------------------------- entry


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ParseError, SchemaError, NotDoublyStochastic) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InfeasibleError, ZeroMeritError, DegenerateMarketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 6
    except MatchingFailure as exc:
        print(f"error: {exc} (hint: lower --epsilon)", file=sys.stderr)
        return 7


def entry() -> None:  # console-script wrapper
    sys.exit(main())


if __name__ == "__main__":
    entry()
