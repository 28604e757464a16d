"""Solver for the two-unknown system

    s a(t)          = lambda1 s + lambda2 a(t)
    s^2/2 + F(t)    = lambda1 t + lambda2 s

For nonzero lambdas the first equation gives s = lambda2 a(t) / (a(t) - lambda1)
and the second collapses to the scalar equation p(t) = q(t) with

    p(v) = F(v) - lambda1 v - lambda2^2 / 2
    q(v) = -lambda1^2 lambda2^2 / (2 (a(v) - lambda1)^2).

Roots of p - q are isolated by sign-change scanning, refined by vectorised
bisection and polished with a guarded Newton step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidInputError, ModelEvaluationError, SingularityError, WrongRouteError
from .models import ScalarModel

SINGULAR_MARGIN = 1e-9
SINGULAR_REL = 1e-12
RESIDUAL_TOL = 1e-9
DEDUP_TOL = 1e-9
DEFAULT_GRID = 100_000
MAX_GRID = 10_000_000


@dataclass(frozen=True)
class SystemSpec:
    model: ScalarModel
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not self.model.is_normalized():
            raise InvalidInputError(f"model {self.model.name} is not normalized (a(0) = F(0) = 0 required)")
        for name in ("lambda1", "lambda2"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")

    @property
    def degenerate(self) -> bool:
        return self.lambda1 == 0 or self.lambda2 == 0


@dataclass
class Solution:
    s: float
    t: float
    residual: float
    trivial: bool
    below_singular: bool     # a(t) < lambda1
    d_sign: int              # sign of s^2 - t a(t); 0 when numerically zero
    branch: str = "reduced"

    def as_dict(self) -> dict:
        return {"s": self.s, "t": self.t, "residual": self.residual, "trivial": self.trivial,
                "a_below_lambda1": self.below_singular, "sign_s2_minus_ta": self.d_sign,
                "branch": self.branch}


@dataclass
class SolutionSet:
    solutions: list
    brackets: list
    grid: int = 0
    rejected: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.solutions)

    @property
    def st(self) -> np.ndarray:
        return np.array([[x.s, x.t] for x in self.solutions]).reshape(-1, 2)

    def as_dict(self) -> dict:
        return {"count": len(self.solutions), "solutions": [x.as_dict() for x in self.solutions],
                "brackets": [list(b) for b in self.brackets], "grid": self.grid,
                "rejected": self.rejected}


def system_residual(spec: SystemSpec, s, t) -> float:
    """Relative residual of both equations, each scaled by 1 + max|term|."""
    a, F = float(spec.model.a(t)), float(spec.model.F(t))
    l1, l2 = spec.lambda1, spec.lambda2
    t1 = (s * a, l1 * s, l2 * a)
    t2 = (0.5 * s * s, F, l1 * t, l2 * s)
    r1 = abs(t1[0] - t1[1] - t1[2]) / (1.0 + max(abs(x) for x in t1))
    r2 = abs(t2[0] + t2[1] - t2[2] - t2[3]) / (1.0 + max(abs(x) for x in t2))
    return float(max(r1, r2))


def _singular_margin_ok(spec: SystemSpec, av) -> np.ndarray:
    return np.abs(np.asarray(av) - spec.lambda1) > SINGULAR_REL * (1.0 + abs(spec.lambda1))


def reduce_u(spec: SystemSpec, v):
    """s = lambda2 a(v) / (a(v) - lambda1); vectorised over ``v``."""
    av = spec.model.a(v)
    if not np.all(_singular_margin_ok(spec, av)):
        raise SingularityError(f"a(v) = lambda1 = {spec.lambda1} at v={v!r}")
    return spec.lambda2 * av / (av - spec.lambda1)


def pq_values(spec: SystemSpec, v):
    """(p(v), q(v)); vectorised over ``v``."""
    av = spec.model.a(v)
    if not np.all(_singular_margin_ok(spec, av)):
        raise SingularityError(f"a(v) = lambda1 = {spec.lambda1} at v={v!r}")
    l1, l2 = spec.lambda1, spec.lambda2
    p = spec.model.F(v) - l1 * np.asarray(v) - 0.5 * l2 * l2
    q = -(l1 * l1 * l2 * l2) / (2.0 * (av - l1) ** 2)
    return p, q


def _g(spec, v):
    """p - q, without the singularity guard (callers keep away from the pole)."""
    v = np.asarray(v, dtype=float)
    av = spec.model.a(v)
    l1, l2 = spec.lambda1, spec.lambda2
    with np.errstate(divide="ignore"):
        out = spec.model.F(v) - l1 * v - 0.5 * l2 * l2 + (l1 * l1 * l2 * l2) / (2.0 * (av - l1) ** 2)
    return out


def _g_prime(spec, v):
    av, ap = spec.model.a(v), spec.model.a_prime(v)
    l1, l2 = spec.lambda1, spec.lambda2
    return (av - l1) - (l1 * l1 * l2 * l2) * ap / (av - l1) ** 3


def _brent(f, lo, hi):
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def _safe(f, x):
    try:
        with np.errstate(all="ignore"):
            y = float(f(x))
    except ModelEvaluationError:
        return math.nan
    return y


def _expand_to_sign_change(G, x0: float, direction: float, limit: float):
    """March from x0 (where G < 0) in ``direction`` with doubling steps until G > 0.

    Returns a root bracket (lo, hi) or None if the limit or a non-finite value is hit.
    """
    step, x = 0.5, x0
    while abs(x - x0) < limit:
        nx = x0 + direction * step
        gx = _safe(G, nx)
        if not math.isfinite(gx):
            return None
        if gx > 0:
            return (x, nx) if x < nx else (nx, x)
        x, step = nx, step * 2.0
    return None


def singular_point(spec: SystemSpec, lo: float = -1e4, hi: float = 1e4) -> float | None:
    """The unique v in [lo, hi] with a(v) = lambda1 (a is increasing), or None."""
    f = lambda x: float(spec.model.a(x)) - spec.lambda1
    dlo, dhi = spec.model.domain()
    lo, hi = max(lo, dlo), min(hi, dhi)
    a, b = max(lo, -1.0), min(hi, 1.0)
    fa, fb = _safe(f, a), _safe(f, b)
    while math.isfinite(fa) and fa > 0 and a > lo:
        b, fb = a, fa
        a = max(lo, a - 2.0 * (1.0 + abs(a)))
        fa = _safe(f, a)
    while math.isfinite(fb) and fb < 0 and b < hi:
        a, fa = b, fb
        b = min(hi, b + 2.0 * (1.0 + abs(b)))
        fb = _safe(f, b)
    if not (math.isfinite(fa) and math.isfinite(fb)) or fa > 0 or fb < 0:
        return None
    if fa == 0:
        return a
    if fb == 0:
        return b
    return _brent(f, a, b)


def split_brackets(spec: SystemSpec, lo: float, hi: float, margin: float = SINGULAR_MARGIN):
    """Split [lo, hi] at the singular level (open margin) and at 0."""
    vs = singular_point(spec, lo, hi)
    pieces = [(lo, hi)]
    if vs is not None and lo < vs < hi:
        pieces = [(lo, vs - margin), (vs + margin, hi)]
    out = []
    for a, b in pieces:
        if a < 0.0 < b:
            out += [(a, 0.0), (0.0, b)]
        elif a < b:
            out.append((a, b))
    return out


def _scan(spec, lo, hi, n, shift=0.0):
    x = np.linspace(lo, hi, n)
    if shift and n > 2:
        x = np.concatenate([[lo], x[:-1] + shift * (x[1] - x[0]), [hi]])
    with np.errstate(invalid="ignore", over="ignore"):
        g = _g(spec, x)
    if not np.all(np.isfinite(g) | np.isposinf(g)):
        raise ModelEvaluationError(f"p - q is non-finite on [{lo}, {hi}]")
    return x, g


def _crossings(x, g):
    idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    exact = np.nonzero(g == 0)[0]
    return idx, exact


def _isolate(spec, lo, hi, grid, max_grid):
    """Sign-change brackets on [lo, hi]; refine the grid when a shifted scan disagrees."""
    n = grid
    while True:
        x, g = _scan(spec, lo, hi, n)
        idx, exact = _crossings(x, g)
        xs, gs = _scan(spec, lo, hi, n, shift=0.5)
        idx2, exact2 = _crossings(xs, gs)
        if len(idx) + len(exact) == len(idx2) + len(exact2) or n * 10 > max_grid:
            return x[idx], x[idx + 1], x[exact], n
        n *= 10


def _bisect_vec(spec, a, b, rel=1e-13, max_iter=200):
    a, b = np.array(a, dtype=float), np.array(b, dtype=float)
    ga = _g(spec, a)
    for _ in range(max_iter):
        if np.all(np.abs(b - a) <= rel * (1.0 + np.abs(a))):
            break
        m = 0.5 * (a + b)
        gm = _g(spec, m)
        left = np.sign(gm) == np.sign(ga)
        a = np.where(left, m, a)
        ga = np.where(left, gm, ga)
        b = np.where(left, b, m)
    return a, b


def _polish(spec, a, b):
    """One guarded Newton step from the bisection midpoint; keep it only if |g| drops."""
    v = 0.5 * (a + b)
    g0 = _g(spec, v)
    with np.errstate(all="ignore"):
        step = g0 / _g_prime(spec, v)
        vn = v - step
    inside = np.isfinite(vn) & (vn >= a) & (vn <= b)
    vn = np.where(inside, vn, v)
    gn = _g(spec, vn)
    return np.where(np.abs(gn) < np.abs(g0), vn, v)


def _classify(spec: SystemSpec, s: float, t: float, branch: str = "reduced") -> Solution:
    a = float(spec.model.a(t))
    d = s * s - t * a
    dtol = 1e-12 * (1.0 + s * s + abs(t * a))
    return Solution(float(s), float(t), system_residual(spec, s, t), bool(s == 0 and t == 0),
                    bool(a < spec.lambda1), 0 if abs(d) <= dtol else int(np.sign(d)), branch)


def _finalize(spec, candidates, brackets, grid, dedup_tol=DEDUP_TOL, residual_tol=RESIDUAL_TOL):
    kept, rejected = [], []
    for sol in sorted(candidates, key=lambda x: (x.t, x.s)):
        if not sol.residual <= residual_tol:
            rejected.append({"s": sol.s, "t": sol.t, "residual": sol.residual})
            continue
        if any(max(abs(sol.s - k.s), abs(sol.t - k.t)) <= dedup_tol for k in kept):
            continue
        kept.append(sol)
    return SolutionSet(kept, [tuple(map(float, b)) for b in brackets], grid, rejected)


def solve(spec: SystemSpec, brackets, grid: int = DEFAULT_GRID, max_grid: int = MAX_GRID) -> SolutionSet:
    """All sign-change roots of p - q on the given brackets, mapped back to (s, t).

    Each bracket is split at the singular level a(v) = lambda1 (open margin
    1e-9) and at 0; the trivial solution (0, 0) is added whenever 0 lies in a
    bracket. Tangential roots (no sign change) are not detected.
    """
    if spec.degenerate:
        raise WrongRouteError("lambda1 or lambda2 is zero; use solve_degenerate")
    if grid < 2:
        raise InvalidInputError("grid must be at least 2")
    brackets = [(float(lo), float(hi)) for lo, hi in brackets]
    for lo, hi in brackets:
        if not (lo < hi and math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidInputError(f"bad bracket ({lo}, {hi})")
    lows, highs, exact = [], [], []
    used = grid
    for lo, hi in brackets:
        for a, b in split_brackets(spec, lo, hi):
            L, H, E, n = _isolate(spec, a, b, grid, max_grid)
            lows.append(L)
            highs.append(H)
            exact.append(E)
            used = max(used, n)
    L = np.concatenate(lows) if lows else np.zeros(0)
    H = np.concatenate(highs) if highs else np.zeros(0)
    roots = list(np.concatenate(exact)) if exact else []
    if L.size:
        a, b = _bisect_vec(spec, L, H)
        roots += list(_polish(spec, a, b))
    cands = []
    for v in roots:
        av = float(spec.model.a(v))
        if abs(av - spec.lambda1) <= SINGULAR_REL * (1.0 + abs(spec.lambda1)):
            continue
        if v == 0.0:
            cands.append(_classify(spec, 0.0, 0.0, "trivial"))
            continue
        cands.append(_classify(spec, float(reduce_u(spec, v)), float(v)))
    if any(lo <= 0.0 <= hi for lo, hi in brackets):
        cands.append(_classify(spec, 0.0, 0.0, "trivial"))
    return _finalize(spec, cands, brackets, used)


def solve_degenerate(spec: SystemSpec, search_limit: float = 1e4) -> SolutionSet:
    """Solutions when lambda1 = 0 or lambda2 = 0, branch by branch.

    lambda1 = 0:  s = lambda2 with F(t) = lambda2^2/2 (t != 0), or t = 0 with s^2/2 = lambda2 s.
    lambda2 = 0:  a(t0) = lambda1 with s^2/2 = a(t0) t0 - F(t0) (s != 0), or s = 0 with F(t) = lambda1 t.
    """
    l1, l2 = spec.lambda1, spec.lambda2
    if not spec.degenerate:
        raise WrongRouteError("both lambdas are nonzero; use solve")
    model = spec.model
    cands = []
    if l1 == 0:
        if l2 != 0:
            c = 0.5 * l2 * l2
            G = lambda x: float(model.F(x)) - c
            for direction in (-1.0, 1.0):
                br = _expand_to_sign_change(G, 0.0, direction, search_limit)
                if br is not None:
                    cands.append(_classify(spec, l2, _brent(G, *br), "s=lambda2"))
        for s in sorted({0.0, 2.0 * l2}):
            cands.append(_classify(spec, s, 0.0, "t=0"))
    else:
        t0 = singular_point(spec, -search_limit, search_limit)
        cands.append(_classify(spec, 0.0, 0.0, "s=0"))
        if t0 is not None:
            val = float(model.a(t0)) * t0 - float(model.F(t0))
            if val > 0:
                s0 = math.sqrt(2.0 * val)
                cands += [_classify(spec, s, t0, "a(t)=lambda1") for s in (-s0, s0)]
            if t0 != 0.0:
                # F(t) - lambda1 t is convex with minimum at t0, so its nonzero root lies beyond t0
                G = lambda x: float(model.F(x)) - l1 * x
                br = _expand_to_sign_change(G, t0, math.copysign(1.0, t0), search_limit)
                if br is not None:
                    cands.append(_classify(spec, 0.0, _brent(G, *br), "s=0"))
    return _finalize(spec, cands, [], 0)


@dataclass
class StructureReport:
    clause_a: bool
    clause_b: bool
    clause_c: bool
    witnesses: dict

    @property
    def passed(self) -> bool:
        return self.clause_a and self.clause_b and self.clause_c

    def as_dict(self) -> dict:
        return {"a": self.clause_a, "b": self.clause_b, "c": self.clause_c,
                "passed": self.passed, "witnesses": self.witnesses}


def structure_check(spec: SystemSpec, sols: SolutionSet) -> StructureReport:
    """Check the three qualitative properties of nondegenerate solution sets.

    (a) at most two solutions with a(t) < lambda1;
    (b) lambda1 > 0 and a(t) < lambda1 imply s^2 - t a(t) > 0, and
        lambda1 < 0 and a(t) > lambda1 imply s^2 - t a(t) < 0 (nontrivial,
        nonzero s^2 - t a(t) only);
    (c) for lambda1 > 0, s^2 - t a(t) strictly decreases along nontrivial
        solutions ordered by lambda1 < a(t1) < a(t2).
    """
    l1 = spec.lambda1
    nontrivial = [x for x in sols.solutions if not x.trivial]
    below = [x for x in sols.solutions if x.below_singular]
    w = {"a": [(x.s, x.t) for x in below] if len(below) > 2 else [], "b": [], "c": []}
    for x in nontrivial:
        if x.d_sign == 0:
            continue
        if l1 > 0 and x.below_singular and x.d_sign < 0:
            w["b"].append((x.s, x.t))
        if l1 < 0 and not x.below_singular and x.d_sign > 0:
            w["b"].append((x.s, x.t))
    if l1 > 0:
        above = sorted((x for x in nontrivial if not x.below_singular),
                       key=lambda x: float(spec.model.a(x.t)))
        d = [x.s * x.s - x.t * float(spec.model.a(x.t)) for x in above]
        for k in range(len(above) - 1):
            if not d[k] > d[k + 1]:
                w["c"].append(((above[k].s, above[k].t), (above[k + 1].s, above[k + 1].t)))
    return StructureReport(not w["a"], not w["b"], not w["c"], w)


def tails_root_free(spec: SystemSpec, lo: float, hi: float) -> tuple:
    """Sufficient checks that p - q has no roots left of ``lo`` / right of ``hi``.

    Uses q < 0 everywhere together with monotonicity of p away from the
    singular level: left of it p decreases in v, right of it p increases.
    Returns (left, right), each True, False (check inconclusive) or None
    (monotonicity does not apply on that tail).
    """
    p_lo = float(pq_values(spec, lo)[0])
    p_hi = float(pq_values(spec, hi)[0])
    left = (p_lo > 0) if float(spec.model.a(lo)) < spec.lambda1 else None
    right = (p_hi > 0) if float(spec.model.a(hi)) > spec.lambda1 else None
    return left, right
