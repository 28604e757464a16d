"""End-to-end reproduction of the explicit six-point example.

Model: exponential for v <= 0, k v^3/6 + v^2/2 + v for v > 0, with
k = 1e8, lambda1 = -1/2, lambda2 = 1/10.
"""
from __future__ import annotations

import math
import time

import numpy as np

from .entropy_system import DEFAULT_GRID, SystemSpec, pq_values, solve, tails_root_free
from .ka import KaConfig, build_A, build_Pi, case_analysis, fit_lambdas, rank_condition, sign_table_for, translate
from .linalg import DEFAULT_RANK_TOL
from .models import AppendixModel
from .tn import MatrixSet, SearchOptions, independence_filter, search_certificate, sign_change_filter

K = 1e8
LAMBDA1 = -0.5
LAMBDA2 = 0.1
V_CAP = (-40.0, 1.0)
LN_HALF = math.log(0.5)

# points where the example claims a strict p < q
PQ_CHECK_POINTS = (-1.0, -0.3, 0.003)


def appendix_spec(k: float = K, lambda1: float = LAMBDA1, lambda2: float = LAMBDA2) -> SystemSpec:
    return SystemSpec(AppendixModel(k), lambda1, lambda2)


def appendix_brackets(margin: float = 1e-9, cap=V_CAP):
    return [(cap[0], LN_HALF - margin), (LN_HALF + margin, 0.0), (0.0, cap[1])]


def interval_counts(t_values) -> dict:
    t = np.asarray(t_values, dtype=float)
    return {
        "below_ln_half": int(np.sum(t < LN_HALF)),
        "ln_half_to_zero": int(np.sum((t > LN_HALF) & (t <= 0.0))),
        "zero_to_0.003": int(np.sum((t > 0.0) & (t < 0.003))),
        "above_0.003": int(np.sum(t > 0.003)),
        "positive": int(np.sum(t > 0.0)),
    }


def pq_checks(spec: SystemSpec) -> dict:
    out = {}
    for v in PQ_CHECK_POINTS:
        p, q = pq_values(spec, v)
        out[f"{v:g}"] = {"p": float(p), "q": float(q), "p_lt_q": bool(p < q)}
    p0, q0 = pq_values(spec, 0.0)
    out["0"] = {"p": float(p0), "q": float(q0), "abs_diff": abs(float(p0) - float(q0))}
    _, q40 = pq_values(spec, -40.0)
    out["-40"] = {"q": float(q40), "dist_to_-1/200": abs(float(q40) + 1.0 / 200.0)}
    return out


def reproduce(k: float = K, grid: int = DEFAULT_GRID, search: bool = True,
              search_opts: SearchOptions | None = None, rank_tol: float = DEFAULT_RANK_TOL) -> dict:
    """Solve, lift, and run every check on the example; returns a JSON-ready dict."""
    spec = appendix_spec(k)
    t0 = time.perf_counter()
    sols = solve(spec, appendix_brackets(), grid)
    t_solve = time.perf_counter() - t0

    config = KaConfig(sols.st, spec.model)
    rank = rank_condition(config, None, rank_tol)
    fits = []
    for i in range(config.N):
        fits.append(fit_lambdas(translate(config, i), rank_tol).as_dict())
    table = sign_table_for(config)
    mset = MatrixSet(config.points)
    filt = sign_change_filter(mset, (1, 2))
    a_vals = np.asarray(spec.model.a(config.v))
    out = {
        "parameters": {"k": k, "lambda1": spec.lambda1, "lambda2": spec.lambda2, "grid": grid},
        "solutions": sols.as_dict(),
        "interval_counts": interval_counts(config.v),
        "max_residual": max(s.residual for s in sols.solutions),
        "tails_root_free": list(tails_root_free(spec, *V_CAP)),
        "pq_checks": pq_checks(spec),
        "rank": rank.as_dict(),
        "A_minus_Pi_shape": list((build_A(config) - build_Pi(np.zeros((3, 2)), config.N)).shape),
        "independence_filter": independence_filter(config.u, config.v, a_vals),
        "lambda_fits": fits,
        "sign_table": table.as_dict(),
        "case_analysis": case_analysis(config, table, rank_tol),
        "sign_change_filter": filt.as_dict(),
        "timing": {"solve_seconds": t_solve},
    }
    if search:
        t1 = time.perf_counter()
        res = search_certificate(mset, search_opts or SearchOptions(exhaustive=True))
        out["search"] = res.as_dict()
        out["timing"]["search_seconds"] = time.perf_counter() - t1
    table_refutes = bool(table.constant_sign_rows) and not table.degenerate_pairs
    out["verdict"] = f"no T_{config.N} ordering" if table_refutes else "inconclusive"
    if search:
        out["checks_agree"] = table_refutes and not out["search"]["found"]
    return out
