"""The entropy set K_a: lifting, configuration matrices, translations, sign tables.

Pivot and point indices are 0-based throughout the Python API.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, InvalidInputError, ModelEvaluationError, RankDeficiencyError
from .linalg import DEFAULT_RANK_TOL, numeric_rank
from .models import ScalarModel

IDENTITY_TOL = 1e-10
SIGN_TOL = 1e-12
DEDUP_TOL = 1e-12


def lift(model: ScalarModel, u: float, v: float) -> np.ndarray:
    """The 3x2 matrix P(u, v) with rows (u, v), (a(v), u), (u a(v), u^2/2 + F(v))."""
    u, v = float(u), float(v)
    if not (np.isfinite(u) and np.isfinite(v)):
        raise InvalidInputError("lift needs finite (u, v)")
    av, Fv = float(model.a(v)), float(model.F(v))
    if not (np.isfinite(av) and np.isfinite(Fv)):
        raise ModelEvaluationError(f"model {model.name} is non-finite at v={v!r}")
    return np.array([[u, v], [av, u], [u * av, 0.5 * u * u + Fv]])


def lift_many(model: ScalarModel, params) -> np.ndarray:
    """Stack of lifted points, shape (N, 3, 2)."""
    p = np.asarray(params, dtype=float).reshape(-1, 2)
    return np.stack([lift(model, u, v) for u, v in p]) if len(p) else np.zeros((0, 3, 2))


def dedup_params(model: ScalarModel, params, tol: float = DEDUP_TOL):
    """Drop points whose lifts coincide (max-abs difference <= tol) with an earlier one.

    Returns ``(kept_params, dropped_indices)``.
    """
    p = np.asarray(params, dtype=float).reshape(-1, 2)
    X = lift_many(model, p)
    keep, dropped = [], []
    for j in range(len(p)):
        if any(np.max(np.abs(X[j] - X[k])) <= tol for k in keep):
            dropped.append(j)
        else:
            keep.append(j)
    return p[keep], dropped


@dataclass
class KaConfig:
    """An ordered collection of points P(u_i, v_i) in K_a."""

    params: np.ndarray
    model: ScalarModel
    dedup_tol: float = DEDUP_TOL

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 1:
            raise InvalidInputError(f"params must have shape (N, 2), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("params must be finite")
        self.params = p
        X = self.points
        for i in range(len(p)):
            for j in range(i):
                if np.max(np.abs(X[i] - X[j])) <= self.dedup_tol:
                    raise InvalidInputError(f"points {j} and {i} lift to the same matrix")

    @property
    def N(self) -> int:
        return len(self.params)

    @property
    def u(self) -> np.ndarray:
        return self.params[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.params[:, 1]

    @property
    def points(self) -> np.ndarray:
        return lift_many(self.model, self.params)


def build_A(config: KaConfig) -> np.ndarray:
    u, v = config.u, config.v
    av = np.asarray(config.model.a(v), dtype=float)
    Fv = np.asarray(config.model.F(v), dtype=float)
    return np.vstack([
        np.concatenate([u, v]),
        np.concatenate([av, u]),
        np.concatenate([u * av, 0.5 * u * u + Fv]),
    ])


def build_Pi(Q, N: int) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 2):
        raise InvalidInputError(f"Q must be 3x2, got {Q.shape}")
    if N < 1:
        raise InvalidInputError("N must be positive")
    return np.hstack([np.repeat(Q[:, :1], N, axis=1), np.repeat(Q[:, 1:], N, axis=1)])


def rank_condition(config: KaConfig, Q=None, rel_tol: float = DEFAULT_RANK_TOL, precise: bool = False):
    """RankReport of A_X - Pi^N(Q); Q defaults to the zero matrix."""
    Q = np.zeros((3, 2)) if Q is None else Q
    return numeric_rank(build_A(config) - build_Pi(Q, config.N), rel_tol, precise=precise)


@dataclass
class TranslatedSet:
    """A configuration translated so that point ``pivot`` sits at the origin.

    ``a_i_of_r[j] = a(v_j) - a(v_i)`` and
    ``F_i_of_r[j] = F(v_j) - F(v_i) - a(v_i) (v_j - v_i)``.
    """

    pivot: int
    h: np.ndarray
    r: np.ndarray
    a_i_of_r: np.ndarray
    F_i_of_r: np.ndarray
    identity_residual: float = 0.0
    matrices: np.ndarray = field(init=False)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.a_i_of_r = np.asarray(self.a_i_of_r, dtype=float)
        self.F_i_of_r = np.asarray(self.F_i_of_r, dtype=float)
        n = self.h.shape
        if not (self.r.shape == n and self.a_i_of_r.shape == n and self.F_i_of_r.shape == n):
            raise InvalidInputError("translated arrays must share one length")
        h, r, ai, Fi = self.h, self.r, self.a_i_of_r, self.F_i_of_r
        self.matrices = np.stack([
            np.column_stack([h, ai, h * ai]),
            np.column_stack([r, h, 0.5 * h * h + Fi]),
        ], axis=-1)

    @property
    def N(self) -> int:
        return len(self.h)

    def matrix(self) -> np.ndarray:
        """The 3 x 2N matrix A^i_X assembled from the translated points."""
        h, r, ai, Fi = self.h, self.r, self.a_i_of_r, self.F_i_of_r
        return np.vstack([
            np.concatenate([h, r]),
            np.concatenate([ai, h]),
            np.concatenate([h * ai, 0.5 * h * h + Fi]),
        ])

    def S_matrix(self) -> np.ndarray:
        """The 5 x N matrix with rows h, r, a^i, h a^i, h^2/2 + F^i."""
        h, r, ai, Fi = self.h, self.r, self.a_i_of_r, self.F_i_of_r
        return np.vstack([h, r, ai, h * ai, 0.5 * h * h + Fi])


def _identity_residual(u, v, av, Fv, i, h, r, ai, Fi) -> float:
    ui, ai0 = u[i], av[i]
    first = u * av - ui * ai0
    lhs1 = h * ai
    rhs1 = first - ai0 * h - ui * ai
    second = (0.5 * u * u + Fv) - (0.5 * ui * ui + Fv[i])
    lhs2 = 0.5 * h * h + Fi
    rhs2 = second - ai0 * r - ui * h
    scale = max(np.max(np.abs(np.concatenate([u * av, ai0 * h, ui * ai, lhs1]))),
                np.max(np.abs(np.concatenate([0.5 * u * u + Fv, ai0 * r, ui * h, lhs2]))),
                np.finfo(float).tiny)
    return float(max(np.max(np.abs(lhs1 - rhs1)), np.max(np.abs(lhs2 - rhs2))) / scale)


def translate(config: KaConfig, i: int, identity_tol: float = IDENTITY_TOL) -> TranslatedSet:
    """Translate the configuration so that point ``i`` becomes the origin.

    Also re-checks the bookkeeping identities linking A^i_X to A_X - Pi^N(X_i);
    a relative residual above ``identity_tol`` raises ConsistencyError.
    """
    N = config.N
    if not (0 <= i < N):
        raise InvalidInputError(f"pivot {i} out of range for N={N}")
    u, v = config.u, config.v
    av = np.asarray(config.model.a(v), dtype=float)
    Fv = np.asarray(config.model.F(v), dtype=float)
    if not (np.all(np.isfinite(av)) and np.all(np.isfinite(Fv))):
        raise ModelEvaluationError("model is non-finite on the configuration")
    h = u - u[i]
    r = v - v[i]
    ai = av - av[i]
    Fi = Fv - Fv[i] - av[i] * r
    res = _identity_residual(u, v, av, Fv, i, h, r, ai, Fi)
    if not res <= identity_tol:
        raise ConsistencyError(f"translation identities fail at pivot {i}: residual {res:.3g}")
    return TranslatedSet(i, h, r, ai, Fi, identity_residual=res)


def row_reduced(config: KaConfig, i: int) -> np.ndarray:
    """A_X - Pi^N(X_i) with row3 <- row3 - a(v_i) row1 - u_i row2.

    Independent route to :meth:`TranslatedSet.matrix`.
    """
    B = build_A(config) - build_Pi(config.points[i], config.N)
    B[2] -= float(config.model.a(config.v[i])) * B[0] + config.u[i] * B[1]
    return B


@dataclass(frozen=True)
class CoefficientPair:
    lambda1: float
    lambda2: float
    residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else 0.0

    def as_dict(self) -> dict:
        return {"lambda1": self.lambda1, "lambda2": self.lambda2,
                "residual": self.residual, "relative_residual": self.relative_residual}


def _pair_rank(x, y, rel_tol) -> int:
    return numeric_rank(np.vstack([x, y]), rel_tol).rank


def fit_lambdas(t: TranslatedSet, rel_tol: float = DEFAULT_RANK_TOL) -> CoefficientPair:
    """Least-squares (lambda1, lambda2) for the translated system

        h a^i(r)       = lambda1 h + lambda2 a^i(r)
        h^2/2 + F^i(r) = lambda1 r + lambda2 h

    over all points. Raises RankDeficiencyError when the linear-independence
    filter on (h, r, a^i) fails or the 2N x 2 design matrix is rank-deficient.
    """
    h, r, ai, Fi = t.h, t.r, t.a_i_of_r, t.F_i_of_r
    if _pair_rank(h, r, rel_tol) < 2 and _pair_rank(h, ai, rel_tol) < 2:
        raise RankDeficiencyError(
            f"pivot {t.pivot}: linear-independence filter failed "
            "(h is parallel to r and to a^i), no coefficient pair is determined")
    design = np.column_stack([np.concatenate([h, r]), np.concatenate([ai, h])])
    rhs = np.concatenate([h * ai, 0.5 * h * h + Fi])
    if numeric_rank(design.T, rel_tol).rank < 2:
        raise RankDeficiencyError(f"pivot {t.pivot}: design matrix of the lambda system has rank < 2")
    col = np.max(np.abs(design), axis=0)
    col[col == 0] = 1.0
    sol, *_ = np.linalg.lstsq(design / col, rhs, rcond=None)
    lam = sol / col
    res = float(np.max(np.abs(design @ lam - rhs)))
    scale = float(max(np.max(np.abs(rhs)), np.max(np.abs(design[:, 0] * lam[0])),
                      np.max(np.abs(design[:, 1] * lam[1])), np.finfo(float).tiny))
    return CoefficientPair(float(lam[0]), float(lam[1]), res, scale)


@dataclass
class SignTable:
    """Symmetric table of D_j^i = (h_j^i)^2 - r_j^i a^i(r_j^i); labels are original indices."""

    values: np.ndarray
    signs: np.ndarray          # +1, -1, 0 on the diagonal, 2 for degenerate entries
    threshold: float
    order: np.ndarray          # permutation sorting the points by v
    constant_sign_rows: list = field(default_factory=list)

    DEGENERATE = 2

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def degenerate_pairs(self) -> list:
        N = self.N
        return [(i, j) for i in range(N) for j in range(i + 1, N) if self.signs[i, j] == self.DEGENERATE]

    def row_sign(self, i: int) -> str:
        off = np.delete(self.signs[i], i)
        if np.any(off == self.DEGENERATE):
            return "degenerate"
        if np.all(off > 0):
            return "positive"
        if np.all(off < 0):
            return "negative"
        return "mixed"

    def as_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "signs": [["?" if s == self.DEGENERATE else "+-0"[[1, -1, 0].index(s)] for s in row]
                      for row in self.signs.tolist()],
            "threshold": self.threshold,
            "order_by_v": self.order.tolist(),
            "row_signs": [self.row_sign(i) for i in range(self.N)],
            "constant_sign_rows": list(self.constant_sign_rows),
            "degenerate_pairs": [list(p) for p in self.degenerate_pairs],
        }

    def to_markdown(self, labels=None) -> str:
        """Render in the layout of a D_j^i sign table, rows and columns sorted by v."""
        labels = [str(k + 1) for k in range(self.N)] if labels is None else [str(x) for x in labels]
        o = list(self.order)
        sym = {1: "+", -1: "-", 0: "0", self.DEGENERATE: "?"}
        lines = ["| D | " + " | ".join(labels[j] for j in o) + " |",
                 "|---|" + "---|" * len(o)]
        for i in o:
            lines.append(f"| {labels[i]} | " + " | ".join(sym[int(self.signs[i, j])] for j in o) + " |")
        return "\n".join(lines)


def _d_table(t: TranslatedSet) -> np.ndarray:
    h, r, ai = t.h, t.r, t.a_i_of_r
    H = h[None, :] - h[:, None]
    R = r[None, :] - r[:, None]
    A = ai[None, :] - ai[:, None]
    D = H * H - R * A
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def sign_table(t: TranslatedSet, tol: float = SIGN_TOL) -> SignTable:
    """Full N x N table of D_j^i, recovered from one translated set.

    Differences of translated quantities give every other pivot
    (h_j^k = h_j^i - h_k^i and likewise for r and a^i), so one pivot suffices.
    Entries with |D| <= tol * max|D| are flagged degenerate and never signed.
    """
    D = _d_table(t)
    N = D.shape[0]
    scale = float(np.max(np.abs(D))) if D.size else 0.0
    thresh = tol * scale
    signs = np.sign(D).astype(int)
    off = ~np.eye(N, dtype=bool)
    signs[off & (np.abs(D) <= thresh)] = SignTable.DEGENERATE
    order = np.argsort(t.r, kind="stable")
    table = SignTable(D, signs, thresh, order)
    table.constant_sign_rows = [i for i in range(N) if N > 1 and table.row_sign(i) in ("positive", "negative")]
    return table


def sign_table_for(config: KaConfig, tol: float = SIGN_TOL) -> SignTable:
    return sign_table(translate(config, 0), tol)


def case_analysis(config: KaConfig, table: SignTable | None = None,
                  rel_tol: float = DEFAULT_RANK_TOL) -> dict:
    """Follow the three-case argument on the v-sorted configuration.

    Fits lambda1 at the two smallest-v pivots, names the case (1: first
    pivot negative; 2: first positive, second negative; 3: both positive),
    lists the candidate rows in the order the argument inspects them, and
    reports the first candidate that is actually constant-sign in ``table``.
    """
    table = sign_table_for(config) if table is None else table
    o = [int(k) for k in np.argsort(config.v, kind="stable")]
    out = {"order_by_v": o, "case": None, "candidates": [], "witness": None, "lambda1": {}}
    if config.N < 3 or np.any(np.diff(config.v[o]) == 0):
        out["case"] = "not-applicable"
        return out
    try:
        fits = {k: fit_lambdas(translate(config, k), rel_tol) for k in (o[0], o[1], o[-1])}
    except RankDeficiencyError as exc:
        out["case"] = "rank-deficient"
        out["detail"] = str(exc)
        return out
    out["lambda1"] = {str(k): f.lambda1 for k, f in fits.items()}
    if any(f.lambda1 == 0 or f.lambda2 == 0 for f in fits.values()):
        out["case"] = "degenerate"
        return out
    first, second, last = o[0], o[1], o[-1]
    if fits[first].lambda1 < 0:
        out["case"], cands = 1, [first]
    elif fits[second].lambda1 < 0:
        out["case"], cands = 2, [last, first, second]
    else:
        out["case"], cands = 3, [last, first, second]
    out["candidates"] = cands
    constant = set(table.constant_sign_rows)
    out["witness"] = next((c for c in cands if c in constant), None)
    return out
