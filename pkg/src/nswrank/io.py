"""File formats: relevance CSV, policy/metrics/decomposition JSON, sweep CSV.

All formats are platform-independent: LF line endings, UTF-8, period decimal
separator.  Matrices serialize with 12 significant digits, sweep rows with 10;
both sit well below every test tolerance.  Every load validates the target
type's invariants and fails loudly.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .bvn import BvnDecomposition
from .core import PolicyTensor, RelevanceMatrix
from .errors import DimensionError, ParseError, SchemaError
from .solvers import SolveDiagnostics

POLICY_SCHEMA = "policy/v1"
METRICS_SCHEMA = "metrics/v1"
DECOMPOSITION_SCHEMA = "decomposition/v1"

SWEEP_HEADER = ("policy,lambda,noise_c,k,n_items,seed,"
                "user_utility,mean_max_envy,pct_improved_10,pct_decreased_10")

_HEADER_RE = re.compile(r"^# m=(\d+) n=(\d+)$")


def _fmt(value: float, digits: int = 12) -> str:
    return f"{value:.{digits}g}"


# ---------------------------------------------------------------- relevance


def save_relevance(rel: RelevanceMatrix, path) -> None:
    lines = [f"# m={rel.m} n={rel.n}"]
    for row in rel.values:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_relevance(path) -> RelevanceMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty relevance file", line=1)
    match = _HEADER_RE.match(lines[0])
    if not match:
        raise ParseError(f"malformed header {lines[0]!r}, expected '# m=<M> n=<N>'",
                         line=1, column=1)
    m, n = int(match.group(1)), int(match.group(2))
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != m:
        raise DimensionError(f"header declares m={m} rows, file has {len(body)}")
    values = np.empty((m, n))
    for r, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != n:
            raise DimensionError(
                f"header declares n={n} columns, row {r + 1} has {len(fields)}")
        col = 1
        for c, field in enumerate(fields):
            try:
                values[r, c] = float(field)
            except ValueError:
                raise ParseError(f"invalid number {field!r}",
                                 line=r + 2, column=col) from None
            col += len(field) + 1
    return RelevanceMatrix(values)


# ------------------------------------------------------------------- policy


def save_policy(path, policy: PolicyTensor, policy_type: str,
                exposure_kind: str, cutoff: int,
                diagnostics: SolveDiagnostics | None = None,
                alpha: float | None = None) -> None:
    # PolicyTensor construction already enforced double stochasticity; going
    # through it again here guards callers that hand-built the tensor.
    policy = PolicyTensor(policy.matrices)
    diag = diagnostics or SolveDiagnostics(objective_value=0.0)
    doc = {
        "schema": POLICY_SCHEMA,
        "m": policy.m,
        "n": policy.n,
        "policy_type": policy_type,
        "alpha": alpha,
        "exposure": {"kind": exposure_kind, "cutoff": cutoff},
        "matrices": [mat.ravel().tolist() for mat in policy.matrices],
        "diagnostics": {
            "objective": diag.objective_value,
            "duality_gap": diag.duality_gap,
            "iterations": diag.iterations,
            "constraint_residual": diag.constraint_residual,
        },
    }
    _dump_json(doc, path)


def load_policy(path) -> dict:
    doc = _read_json(path)
    _require_schema(doc, POLICY_SCHEMA)
    m, n = int(doc["m"]), int(doc["n"])
    mats = np.asarray(doc["matrices"], dtype=np.float64)
    if mats.shape != (m, n * n):
        raise DimensionError(
            f"expected {m} row-major arrays of {n * n} numbers, got {mats.shape}")
    doc = dict(doc)
    doc["policy"] = PolicyTensor(mats.reshape(m, n, n))
    return doc


# ------------------------------------------------------------------ metrics


def save_metrics(path, report) -> None:
    ratios = [None if np.isnan(v) else float(v)
              for v in report.per_item_impact_ratio_vs_uniform]
    doc = {
        "schema": METRICS_SCHEMA,
        "user_utility": report.user_utility,
        "mean_max_envy": report.mean_max_envy,
        "pct_improved_10": report.pct_improved_10,
        "pct_decreased_10": report.pct_decreased_10,
        "per_item_impact": [float(v) for v in report.per_item_impact],
        "per_item_ratio_vs_uniform": ratios,
        "excluded_items": list(report.excluded_items),
    }
    _dump_json(doc, path)


def load_metrics(path) -> dict:
    doc = _read_json(path)
    _require_schema(doc, METRICS_SCHEMA)
    n = len(doc["per_item_impact"])
    if len(doc["per_item_ratio_vs_uniform"]) != n:
        raise DimensionError("per-item arrays disagree in length")
    return doc


# ------------------------------------------------------------ decomposition


def save_decomposition(path, dec: BvnDecomposition) -> None:
    doc = {
        "schema": DECOMPOSITION_SCHEMA,
        "m": dec.m,
        "n": dec.n,
        "epsilon": dec.epsilon,
        "users": [
            [{"weight": float(w), "items_by_rank": perm.tolist()}
             for w, perm in user_terms]
            for user_terms in dec.terms
        ],
    }
    _dump_json(doc, path)


def load_decomposition(path) -> BvnDecomposition:
    doc = _read_json(path)
    _require_schema(doc, DECOMPOSITION_SCHEMA)
    m, n = int(doc["m"]), int(doc["n"])
    if len(doc["users"]) != m:
        raise DimensionError(f"expected {m} users, got {len(doc['users'])}")
    terms = []
    for user_terms in doc["users"]:
        parsed = []
        for term in user_terms:
            perm = np.asarray(term["items_by_rank"], dtype=np.int64)
            if sorted(perm.tolist()) != list(range(n)):
                raise ParseError(f"{perm.tolist()} is not a permutation of 0..{n - 1}")
            parsed.append((float(term["weight"]), perm))
        terms.append(parsed)
    return BvnDecomposition(m=m, n=n, epsilon=float(doc["epsilon"]),
                            terms=tuple(terms))


# -------------------------------------------------------------------- sweep


def append_sweep_row(path, policy: str, lam: float, noise_c: float, k: int,
                     n_items: int, seed: int, metrics_row) -> None:
    """Append one row; writes the header first when the file is new or empty.

    metrics_row is (utility, mean_max_envy, pct_improved, pct_decreased) or
    the string ``"error"`` to record a failed grid point.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            has_header = fh.readline().strip() != ""
    except FileNotFoundError:
        has_header = False
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        if not has_header:
            fh.write(SWEEP_HEADER + "\n")
        fh.write(format_sweep_row(policy, lam, noise_c, k, n_items, seed,
                                  metrics_row) + "\n")


def format_sweep_row(policy, lam, noise_c, k, n_items, seed, metrics_row) -> str:
    prefix = (f"{policy},{_fmt(lam, 10)},{_fmt(noise_c, 10)},{k},{n_items},{seed}")
    if metrics_row == "error":
        return prefix + ",error,error,error,error"
    return prefix + "," + ",".join(_fmt(v, 10) for v in metrics_row)


# ------------------------------------------------------------------ helpers


def _dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), line=exc.lineno, column=exc.colno) from None


def _require_schema(doc, expected: str) -> None:
    found = doc.get("schema")
    if found != expected:
        raise SchemaError(f"expected schema {expected!r}, found {found!r}")
