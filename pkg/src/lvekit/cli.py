"""Batch command-line front end.

Each run reads an optional JSON config, applies flag overrides, validates
every parameter against the bounds of the module it feeds, dispatches to one
command and writes line-delimited JSON records: a header, one record per
item, a summary and a usage record.  ``--csv`` adds a flat projection of the
item records for plotting elsewhere.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from lvekit import borel, combinatorics, mlve_toy, tensor_quartic, vector_lve
from lvekit.errors import DomainError, LvekitError

SCHEMA_VERSION = 1
OUT_DIR_ENV = "LVEKIT_OUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2


class UsageError(Exception):
    """Unknown command, unreadable config or unknown parameter."""


# ----------------------------------------------------------------------------
# Parameters


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # int, float, complex, str, bool, ints, edges, strs, size
    default: Any
    lo: float | None = None
    hi: float | None = None
    choices: tuple[str, ...] | None = None
    help: str = ""


def _parse_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and {"rho", "phi"} <= value.keys():
        return cmath.rect(float(value["rho"]), float(value["phi"]))
    if isinstance(value, str):
        return complex(value.replace(" ", "").replace("i", "j"))
    return complex(value)


def _coerce(p: Param, value: Any) -> Any:
    try:
        if p.kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if p.kind == "float":
            return float(value)
        if p.kind == "complex":
            return _parse_complex(value)
        if p.kind == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError
                return value.lower() in ("true", "1", "yes")
            return bool(value)
        if p.kind == "str":
            return str(value)
        if p.kind == "size":
            # positive integer or "inf"
            if isinstance(value, str) and value.lower() in ("inf", "infinity"):
                return math.inf
            v = float(value)
            if v != math.inf and not v.is_integer():
                raise ValueError
            return v if v == math.inf else int(v)
        if isinstance(value, str):
            value = json.loads(value) if value.strip().startswith("[") else value.split(",")
        if p.kind == "ints":
            return tuple(int(v) for v in value)
        if p.kind == "strs":
            return tuple(str(v).strip() for v in value)
        if p.kind == "edges":
            return tuple((int(a), int(b)) for a, b in value)
    except (TypeError, ValueError, json.JSONDecodeError):
        pass
    raise DomainError(f"parameter {p.name!r} expects {p.kind}, got {value!r}")


def _check_bounds(p: Param, value: Any) -> None:
    items = value if p.kind in ("ints",) else (value,)
    for v in items:
        if p.kind == "complex":
            mag = abs(v)
            if p.hi is not None and mag > p.hi:
                raise DomainError(f"parameter {p.name!r}: |{p.name}| = {mag:g} exceeds the bound {p.hi:g}")
            continue
        if p.lo is not None and v < p.lo:
            raise DomainError(f"parameter {p.name!r} = {v} is below the lower bound {p.lo:g}")
        if p.hi is not None and v > p.hi:
            raise DomainError(f"parameter {p.name!r} = {v} exceeds the upper bound {p.hi:g}")
    if p.choices is not None:
        for v in value if p.kind == "strs" else (value,):
            if v not in p.choices:
                raise DomainError(f"parameter {p.name!r} = {v!r} is not one of {list(p.choices)}")


# ----------------------------------------------------------------------------
# Config and reports


@dataclass
class ExperimentConfig:
    command: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    csv: str | None = None
    budget: int | None = None
    accept_exponential_cost: bool = False


@dataclass
class ReportBundle:
    command: str
    params: dict[str, Any]
    seed: int
    items: list[dict[str, Any]]
    summary: dict[str, Any]
    wall_clock: float = 0.0
    budget: int | None = None

    def records(self) -> list[dict[str, Any]]:
        head = {
            "record": "header",
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
        }
        out = [head]
        out += [{"record": "item", **it} for it in self.items]
        out.append({"record": "summary", **self.summary})
        out.append({"record": "usage", "wall_clock_s": round(self.wall_clock, 6), "budget": self.budget})
        return [to_jsonable(r) for r in out]


def to_jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": to_jsonable(x.real), "im": to_jsonable(x.imag)}
    if dataclasses.is_dataclass(x):
        return to_jsonable(dataclasses.asdict(x))
    return x if x is None or isinstance(x, str) else str(x)


def _flatten(rec: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def items_csv(bundle: ReportBundle) -> str:
    rows = [_flatten(r) for r in bundle.records() if r["record"] == "item"]
    names: list[str] = []
    for r in rows:
        names += [k for k in r if k not in names]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# ----------------------------------------------------------------------------
# Commands


@dataclass(frozen=True)
class Command:
    name: str
    module: str
    params: tuple[Param, ...]
    run: Callable[[dict[str, Any], ExperimentConfig], tuple[list[dict], dict]]
    help: str


def _forest_verify(a, cfg):
    rng = np.random.default_rng(cfg.seed)
    n = a["n"]
    m = n * (n - 1) // 2
    items = []
    for trial in range(a["trials"]):
        t = rng.uniform(-a["scale"], a["scale"], size=m)
        r = combinatorics.forest_formula_verify(n, t, accept_exponential_cost=cfg.accept_exponential_cost)
        items.append({"trial": trial, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual, "quadrature_error": r.quadrature_error})
    worst = max(it["residual"] for it in items)
    forests = len(combinatorics.enumerate_forests(n))
    return items, {"n": n, "forests": forests, "trials": a["trials"], "max_residual": worst, "passed": worst < a["tol"]}


def _weights(a, cfg):
    g = combinatorics.LabeledGraph(a["n"], a["edges"])
    acc = cfg.accept_exponential_cost
    weights = combinatorics.all_tree_weights(g, accept_exponential_cost=acc)
    items = []
    total = Fraction(0)
    lemma_ok = True
    for tree, w in weights.items():
        total += w.fraction
        row = {"edges": list(tree.edges), "weight_num": w.numerator, "weight_den": w.denominator, "weight": w.fraction}
        if a["check_integral"]:
            same = combinatorics.tree_weight_integral(g, tree, accept_exponential_cost=acc).fraction == w.fraction
            row["integral_agrees"] = same
            lemma_ok = lemma_ok and same
        items.append(row)
    summary = {
        "trees": len(weights),
        "kirchhoff_count": combinatorics.kirchhoff_tree_count(g),
        "total": total,
        "sums_to_one": total == 1,
    }
    if a["check_integral"]:
        summary["integral_agrees"] = lemma_ok
    return items, summary


def _jungle_verify(a, cfg):
    acc = cfg.accept_exponential_cost
    items = []
    for k in range(1, a["n"] + 1):
        got = len(mlve_toy.enumerate_two_level_trees(k, accept_exponential_cost=acc))
        expected = 2 ** (k - 1) * k ** (k - 2) if k > 1 else 1
        items.append({"n": k, "two_level_trees": got, "expected": expected, "match": got == expected})
    summary: dict[str, Any] = {"counts_match": all(it["match"] for it in items)}
    if a["n"] <= 5 or acc:
        jungles = combinatorics.enumerate_jungles(a["n"], a["m"], accept_exponential_cost=acc)
        nested = all(lo.subset_of(hi) for j in jungles for lo, hi in zip(j.levels, j.levels[1:]))
        summary.update({"jungles": len(jungles), "levels": a["m"], "nested": nested})
    return items, summary


def _borel_check(a, cfg):
    series = borel.d0_phi4_series(a["orders"])
    ratios = borel.coefficient_ratios(series)
    items = [{"kind": "ratio", "n": n, "ratio_over_n": r} for n, r in enumerate(ratios, start=1)]
    p = vector_lve.ModelPoint(a["z"], a["N"])
    samples = []
    for n in range(a["fit_min"], a["fit_max"] + 1):
        rem = vector_lve.taylor_remainder(p, n)
        samples.append((n, a["z"], rem))
        items.append({"kind": "remainder", "n": n, "remainder": rem})
    fit = borel.remainder_fit(samples, min_order=a["fit_min"])
    summary = {
        "last_ratio_over_n": ratios[-1] if ratios else None,
        "K": fit.K,
        "sigma": fit.sigma,
        "fit_residual": fit.residual,
        "fit_orders": list(fit.n_range),
    }
    return items, summary


def _model_point(a) -> vector_lve.ModelPoint:
    return vector_lve.ModelPoint(a["z"], a["N"])


def _reference_g2(p: vector_lve.ModelPoint) -> tuple[str, complex]:
    if p.z.imag == 0 and -0.25 < p.z.real <= 0 and p.N <= 64:
        return "oracle", complex(vector_lve.oracle_g2(p))
    return "catalan-limit", vector_lve.catalan_g2(p.z)


def _lve_sum(a, cfg):
    p = _model_point(a)
    r = vector_lve.lve_partial_sum(p, a["n_max"], a["budget"], seed=cfg.seed, method=a["method"])
    trees = {n: vector_lve.enumerate_rooted_plane_trees(n) for n in range(a["n_max"] + 1)}
    items = [
        {"n": n, "index": i, "tree": trees[n][i].dyck_word(), "value": t.value, "stderr": t.stderr, "method": t.method}
        for n, i, t in r.terms
    ]
    kind, ref = _reference_g2(p)
    gap = abs(r.value - ref)
    summary = {
        "G2": r.value,
        "stderr": r.stderr,
        "tail_bound": r.tail_bound,
        "per_order": list(r.per_order),
        "reference": kind,
        "reference_value": ref,
        "discrepancy": gap,
        "within_bound": gap <= r.tail_bound + 3 * r.stderr,
    }
    return items, summary


def _lve_oracle(a, cfg):
    p = _model_point(a)
    coeffs = vector_lve.perturbative_coefficients(int(p.N), a["orders"])
    items = [{"k": k, "coefficient": c, "coefficient_float": float(c)} for k, c in enumerate(coeffs)]
    summary = {
        "oracle_g2": vector_lve.oracle_g2(p),
        "free_energy_g2": vector_lve.g2_from_free_energy(p),
        "schwinger_dyson_residual": vector_lve.schwinger_dyson_residual(p),
        "catalan_limit": vector_lve.catalan_g2(p.z),
    }
    return items, summary


def _mean_cut(a, cfg):
    r = vector_lve.mean_cut_functions(a["z"], a["N"], a["n_max"], a["budget"], seed=cfg.seed)
    return [], {"mean": r.mean, "cut": r.cut, "mean_stderr": r.mean_stderr, "cut_stderr": r.cut_stderr}


def _mlve_demo(a, cfg):
    m = mlve_toy.SliceModel(a["M"], a["j_max"], a["lam"], a["j_min"])
    r = mlve_toy.mlve_truncated_sum(m, a["n_max"])
    items = [{"n": n, "term": t} for n, t in enumerate(r.per_order, start=1)]
    return items, {"N": m.N, "value": r.value, "oracle": r.oracle, "residual": r.residual}


def _logz_oracle(a, cfg):
    items = []
    prev = None
    for j in range(a["j_min"], a["j_max"] + 1):
        v = mlve_toy.oracle_logZ(mlve_toy.SliceModel(a["M"], j, a["lam"], a["j_min"]))
        items.append({"j_max": j, "value": v, "cauchy_difference": None if prev is None else abs(v - prev)})
        prev = v
    diffs = [it["cauchy_difference"] for it in items[1:]]
    summary = {
        "max_modulus": max(abs(it["value"]) for it in items),
        "differences_decreasing": all(b < a_ for a_, b in zip(diffs, diffs[1:])),
    }
    return items, summary


def _invariants(a, cfg):
    d, N = a["d"], a["N"]
    rng = np.random.default_rng(cfg.seed)
    shape = (N,) * d
    T = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2)
    items = []
    for C in tensor_quartic.enumerate_quartic_invariants(d):
        v = tensor_quartic.evaluate_invariant(T, C, accept_exponential_cost=cfg.accept_exponential_cost)
        items.append({"d": d, "color_set": C.label, "melonic": C.melonic, "value": v.real})
    melonic = sum(it["melonic"] for it in items)
    return items, {"d": d, "N": N, "count": len(items), "melonic": melonic, "necklace": len(items) - melonic}


def _gaussian_check(a, cfg):
    r = tensor_quartic.gaussian_moment_check(a["d"], a["N"], a["budget"], seed=cfg.seed)
    items = [
        {"label": m.label, "mean": m.mean, "stderr": m.stderr, "exact": float(m.exact), "passed": m.passed}
        for m in (r.quadratic, *r.invariants)
    ]
    return items, {"d": r.d, "N": r.N, "samples": r.samples, "passed": r.passed}


def _power_count(a, cfg):
    items = []
    summary = {}
    for g in a["graphs"]:
        pc = tensor_quartic.power_counting_t43(g, a["cutoffs"])
        items += [{"graph": g, "cutoff": c, "value": v} for c, v in zip(pc.cutoffs, pc.values)]
        summary[g] = {"growth": pc.growth, "slope": pc.slope, "fit_residual": pc.fit_residual}
    return items, summary


def _dress(tree: tensor_quartic.ColoredTree, pattern: str, rng: np.random.Generator) -> tensor_quartic.ResolventDressedTree:
    corners = list(tree.corners())
    if pattern == "none":
        codes = [0] * len(corners)
    elif pattern == "resolvent":
        codes = [1] * len(corners)
    elif pattern == "adjoint":
        codes = [2] * len(corners)
    elif pattern == "alternate":
        codes = [1 + k % 2 for k in range(len(corners))]
    else:
        codes = [int(c) for c in rng.integers(0, 3, size=len(corners))]
    A = {c for c, x in zip(corners, codes) if x == 1}
    Ad = {c for c, x in zip(corners, codes) if x == 2}
    return tensor_quartic.ResolventDressedTree(tree, A, Ad)


def _ics_demo(a, cfg):
    palette = tensor_quartic.enumerate_quartic_invariants(a["d"])
    trees = tensor_quartic.enumerate_colored_trees(a["n"], palette)
    if a["trees"]:
        trees = trees[: a["trees"]]
    rng = np.random.default_rng(cfg.seed)
    items = []
    for k, tree in enumerate(trees):
        T = _dress(tree, a["dressing"], rng)
        r = tensor_quartic.ics_verify(T, a["N"], a["lam"], a["budget"], seed=cfg.seed + k, iterations=a["iterations"])
        items.append({
            "tree_id": r.tree_id, "n": r.n, "p": r.p, "samples": r.samples, "violations": r.violations,
            "K": r.K, "max_undressed": r.max_undressed, "max_dressed": r.max_dressed,
            "q_final": r.rarefaction[-1] if r.rarefaction else None,
        })
    worst = tensor_quartic.rarefaction_trace(a["n"], 2 * a["n"], a["iterations"])
    summary = {
        "trees": len(items),
        "violations": sum(it["violations"] for it in items),
        "K": vector_lve.resolvent_bound(a["lam"]),
        "worst_case_q": [float(q) for q in worst.q],
        "ratio_bound_holds": worst.ratio_bound_holds,
    }
    return items, summary


def _graphs_d0(a, cfg):
    items = []
    consistent = True
    for n in range(a["orders"] + 1):
        count = combinatorics.count_labeled_phi4_graphs(n)
        closed = math.factorial(4 * n) // (2 ** (2 * n) * math.factorial(2 * n))
        coeff = borel.d0_coefficient(n)
        consistent = consistent and count == closed and abs(coeff) * math.factorial(n) == count
        items.append({"n": n, "labeled_graphs": count, "closed_form": closed, "coefficient": coeff})
    return items, {"orders": a["orders"], "consistent": consistent}


_SEED_NOTE = "uses --seed"
_N_SIZE = Param("N", "size", 4, 1, None, help="vector size (integer or inf)")

COMMANDS: dict[str, Command] = {
    c.name: c
    for c in [
        Command("forest-verify", "combinatorics", (
            Param("n", "int", 3, 2, 5),
            Param("trials", "int", 1, 1, 10_000),
            Param("scale", "float", 1.0, 0.0, 5.0, help="couplings drawn from [-scale, scale]"),
            Param("tol", "float", 1e-8, 0.0, None),
        ), _forest_verify, "forest formula on exponential test functions, random couplings " + _SEED_NOTE),
        Command("weights", "combinatorics", (
            Param("n", "int", 3, 1, combinatorics.MAX_VERTICES),
            Param("edges", "edges", ((0, 1), (1, 2), (2, 0), (0, 1))),
            Param("check_integral", "bool", True),
        ), _weights, "barycentric tree weights of a multigraph"),
        Command("jungle-verify", "combinatorics", (
            Param("n", "int", 4, 1, 6),
            Param("m", "int", 2, 1, 3),
        ), _jungle_verify, "two-level spanning tree counts and jungle nesting"),
        Command("borel-check", "borel", (
            Param("orders", "int", 21, 3, borel.MAX_D0_ORDERS + 1),
            Param("z", "float", -0.03, -0.0625, 0.0),
            Param("N", "int", 1, 1, 64),
            Param("fit_min", "int", 2, 1, 10),
            Param("fit_max", "int", 6, 3, 12),
        ), _borel_check, "factorial growth of series coefficients and remainder fit"),
        Command("lve-sum", "vector_lve", (
            Param("z", "complex", -0.03, hi=0.0625),
            _N_SIZE,
            Param("n_max", "int", 5, 0, vector_lve.MAX_TREE_EDGES),
            Param("budget", "int", vector_lve.DEFAULT_SAMPLES, 2, 10**8),
            Param("method", "str", "auto", choices=("auto", "monte-carlo", "quadrature")),
        ), _lve_sum, "tree-by-tree LVE partial sum of the two-point function " + _SEED_NOTE),
        Command("lve-oracle", "vector_lve", (
            Param("z", "float", -0.03, -0.25, 0.0),
            Param("N", "int", 4, 1, 64),
            Param("orders", "int", 6, 1, 12),
        ), _lve_oracle, "radial-integral oracle and perturbative coefficients"),
        Command("mean-cut", "vector_lve", (
            Param("z", "float", 0.05, 0.0, 0.125),
            _N_SIZE,
            Param("n_max", "int", 3, 0, 6),
            Param("budget", "int", vector_lve.DEFAULT_SAMPLES, 2, 10**8),
        ), _mean_cut, "mean and cut functions on the unstable side " + _SEED_NOTE),
        Command("mlve-demo", "mlve_toy", (
            Param("M", "int", 2, 2, 4),
            Param("j_max", "int", 4, 1, 8),
            Param("j_min", "int", 1, 1, 8),
            Param("lam", "float", 0.2, -0.5, 0.5),
            Param("n_max", "int", 2, 1, 3),
        ), _mlve_demo, "two-level tree expansion of the slice toy model"),
        Command("logz-oracle", "mlve_toy", (
            Param("M", "int", 2, 2, 4),
            Param("j_max", "int", 12, 1, 16),
            Param("j_min", "int", 1, 1, 16),
            Param("lam", "complex", 1.0, hi=1.0),
        ), _logz_oracle, "exact log Z of the slice toy model against the cutoff"),
        Command("invariants", "tensor_quartic", (
            Param("d", "int", 4, 2, tensor_quartic.MAX_RANK),
            Param("N", "int", 2, 1, 64),
        ), _invariants, "quartic invariant catalog evaluated on a random tensor " + _SEED_NOTE),
        Command("gaussian-check", "tensor_quartic", (
            Param("d", "int", 3, 2, tensor_quartic.MAX_RANK),
            Param("N", "int", 2, 1, 64),
            Param("budget", "int", 4000, 2, 10**7),
        ), _gaussian_check, "free-measure moments against exact Wick sums " + _SEED_NOTE),
        Command("power-count", "tensor_quartic", (
            Param("graphs", "strs", tensor_quartic.T43_GRAPHS, choices=tensor_quartic.T43_GRAPHS),
            Param("cutoffs", "ints", (8, 16, 32, 64), 1, 4096),
        ), _power_count, "cutoff growth of the rank-3 single-vertex graphs"),
        Command("ics-demo", "tensor_quartic", (
            Param("d", "int", 3, 2, 5),
            Param("n", "int", 2, 1, 4),
            Param("N", "int", 3, 1, 6),
            Param("lam", "complex", 0.1, hi=1.0),
            Param("budget", "int", 200, 1, 10**6),
            Param("dressing", "str", "alternate", choices=("alternate", "resolvent", "adjoint", "random", "none")),
            Param("trees", "int", 0, 0, None, help="0 means every tree"),
            Param("iterations", "int", 20, 0, 200),
        ), _ics_demo, "resolvent bound on dressed trees and the rarefaction sequence " + _SEED_NOTE),
        Command("graphs-d0", "combinatorics", (
            Param("orders", "int", 10, 0, borel.MAX_D0_ORDERS),
        ), _graphs_d0, "labeled quartic vacuum graph counts against the series coefficients"),
    ]
}


def list_commands() -> list[dict[str, str]]:
    return [{"command": c.name, "module": c.module, "help": c.help} for c in COMMANDS.values()]


def _cross_checks(name: str, a: dict[str, Any]) -> None:
    # preconditions that involve more than one parameter or a module predicate
    if name in ("lve-sum",) and not vector_lve.cardioid_contains(-a["z"], vector_lve.CardioidSpec.UNIFORM_HALF_DISK):
        raise DomainError("parameter 'z' must satisfy 16|z| < 1 with Re z <= 0")
    if name == "ics-demo" and not vector_lve.cardioid_contains(a["lam"]):
        raise DomainError("parameter 'lam' must lie in the cardioid rho < cos^2(phi/2)")
    if name == "logz-oracle" and a["j_min"] > a["j_max"]:
        raise DomainError("parameter 'j_min' exceeds 'j_max'")
    if name == "mlve-demo" and a["j_min"] > a["j_max"]:
        raise DomainError("parameter 'j_min' exceeds 'j_max'")
    if name == "borel-check" and a["fit_max"] - a["fit_min"] < 2:
        raise DomainError("parameters 'fit_min'..'fit_max' must span at least three orders")
    if name == "weights":
        n = a["n"]
        for e in a["edges"]:
            if not all(0 <= v < n for v in e):
                raise DomainError(f"parameter 'edges': edge {e} has an endpoint outside [0, {n})")


def validate(config: ExperimentConfig) -> dict[str, Any]:
    """Resolved parameters for ``config``; raises on any violated bound."""
    if config.command not in COMMANDS:
        raise UsageError(f"unknown command {config.command!r}; choose from {list(COMMANDS)}")
    cmd = COMMANDS[config.command]
    known = {p.name: p for p in cmd.params}
    extra = set(config.params) - set(known)
    if extra:
        raise UsageError(f"unknown parameter(s) {sorted(extra)} for {cmd.name}; known: {sorted(known)}")
    resolved = {}
    for p in cmd.params:
        value = _coerce(p, config.params.get(p.name, p.default))
        _check_bounds(p, value)
        resolved[p.name] = value
    if config.budget is not None:
        if "budget" not in known:
            raise UsageError(f"{cmd.name} takes no sample budget")
        resolved["budget"] = _coerce(known["budget"], config.budget)
        _check_bounds(known["budget"], resolved["budget"])
    _cross_checks(cmd.name, resolved)
    return resolved


def run(config: ExperimentConfig) -> ReportBundle:
    params = validate(config)
    start = time.perf_counter()
    items, summary = COMMANDS[config.command].run(params, config)
    return ReportBundle(
        config.command, params, config.seed, items, summary, time.perf_counter() - start, params.get("budget")
    )


# ----------------------------------------------------------------------------
# Entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lvekit", description=__doc__.split("\n\n")[0])
    ap.add_argument("command_pos", nargs="?", metavar="COMMAND", help="command name (or use --command)")
    ap.add_argument("--command", dest="command_flag")
    ap.add_argument("--config", help="JSON file with 'command', 'params', 'seed' keys")
    ap.add_argument("--param", "-p", action="append", default=[], metavar="KEY=VALUE", help="parameter override")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help=f"JSONL output path (default: ${OUT_DIR_ENV}/<command>.jsonl or stdout)")
    ap.add_argument("--csv", help="also write item records as CSV")
    ap.add_argument("--budget", type=int, help="sample budget for Monte Carlo commands")
    ap.add_argument("--accept-exponential-cost", action="store_true")
    ap.add_argument("--list", action="store_true", help="print the command catalog")
    return ap


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    base: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(base, dict):
            raise UsageError("config must be a JSON object")
    command = args.command_flag or args.command_pos or base.get("command")
    if not command:
        raise UsageError("no command given")
    params = dict(base.get("params", {}))
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    out = args.out or base.get("out")
    if out is None and os.environ.get(OUT_DIR_ENV):
        out = os.path.join(os.environ[OUT_DIR_ENV], f"{command}.jsonl")
    return ExperimentConfig(
        command=command,
        params=params,
        seed=args.seed if args.seed is not None else int(base.get("seed", 0)),
        out=out,
        csv=args.csv or base.get("csv"),
        budget=args.budget if args.budget is not None else base.get("budget"),
        accept_exponential_cost=args.accept_exponential_cost or bool(base.get("accept_exponential_cost", False)),
    )


def _emit_error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"record": "error", "schema_version": SCHEMA_VERSION, "error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.list:
        for row in list_commands():
            print(json.dumps(row))
        return EXIT_OK
    try:
        config = _load_config(args)
        bundle = run(config)
    except UsageError as exc:
        return _emit_error("UsageError", str(exc), EXIT_USAGE)
    except LvekitError as exc:
        return _emit_error(type(exc).__name__, str(exc), exc.exit_code)
    lines = "".join(json.dumps(r) + "\n" for r in bundle.records())
    if config.out:
        os.makedirs(os.path.dirname(os.path.abspath(config.out)), exist_ok=True)
        with open(config.out, "w") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    if config.csv:
        with open(config.csv, "w", newline="") as fh:
            fh.write(items_csv(bundle))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
