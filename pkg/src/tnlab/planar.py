"""Planar (two-dimensional span) configurations.

Covers the span-dimension test, the coefficient fits that express the
translated rows in terms of a two-row basis, and the rank-one directions of a
plane of 3x2 matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, WrongRegimeError
from .ka import TranslatedSet
from .linalg import DEFAULT_RANK_TOL, numeric_rank
from .tn import MatrixSet

ANGLE_TOL = 1e-7
CONSISTENCY_TOL = 1e-8


def span_dimension(mset: MatrixSet, i: int, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """dim Span{X_j - X_i}, via the numeric rank of the N x 6 difference matrix."""
    X = mset.points
    if not (0 <= i < len(X)):
        raise InvalidInputError(f"index {i} out of range")
    return numeric_rank((X - X[i]).reshape(len(X), 6), rel_tol).rank


@dataclass
class PlanarCoefficients:
    variant: str                     # "case1": basis (h, r); "case2": basis (h, a^i)
    alpha: tuple
    beta: tuple
    gamma: tuple
    residual: float                  # max-abs residual of the three row fits
    consistency: tuple               # residuals of the two shared-root relations
    consistent: bool
    lambda_candidate: tuple          # (lambda1, lambda2) read off the fitted coefficients
    lambda_residual: float           # max-abs residual of the lambda system with that candidate

    @property
    def lambdas(self) -> tuple | None:
        return self.lambda_candidate if self.consistent else None

    def as_dict(self) -> dict:
        return {"variant": self.variant, "alpha": list(self.alpha), "beta": list(self.beta),
                "gamma": list(self.gamma), "residual": self.residual,
                "consistency": list(self.consistency), "consistent": self.consistent,
                "lambdas": None if self.lambdas is None else list(self.lambdas),
                "lambda_candidate": list(self.lambda_candidate), "lambda_residual": self.lambda_residual}


def _lstsq2(basis: np.ndarray, y: np.ndarray):
    col = np.max(np.abs(basis), axis=0)
    col[col == 0] = 1.0
    c, *_ = np.linalg.lstsq(basis / col, y, rcond=None)
    c = c / col
    return c, float(np.max(np.abs(basis @ c - y))) if len(y) else 0.0


def fit_planar(t: TranslatedSet, rel_tol: float = DEFAULT_RANK_TOL,
               consistency_tol: float = CONSISTENCY_TOL) -> PlanarCoefficients:
    """Express the rows of S^i = (h, r, a^i, h a^i, h^2/2 + F^i) in a two-row basis.

    case1 uses (h, r) when independent, otherwise case2 uses (h, a^i). The
    shared-root relations of the two leading minors are then tested, and the
    implied (lambda1, lambda2) is evaluated against the lambda system.
    """
    S = t.S_matrix()
    rank = numeric_rank(S, rel_tol).rank
    if rank != 2:
        raise WrongRegimeError(f"rank of S at pivot {t.pivot} is {rank}, expected 2")
    h, r, ai, Fi = t.h, t.r, t.a_i_of_r, t.F_i_of_r
    ha, hF = h * ai, 0.5 * h * h + Fi
    if numeric_rank(np.vstack([h, r]), rel_tol).rank == 2:
        variant, basis, first = "case1", np.column_stack([h, r]), ai
    elif numeric_rank(np.vstack([h, ai]), rel_tol).rank == 2:
        variant, basis, first = "case2", np.column_stack([h, ai]), r
    else:
        raise WrongRegimeError(f"pivot {t.pivot}: neither (h, r) nor (h, a^i) is independent")
    alpha, ra = _lstsq2(basis, first)
    beta, rb = _lstsq2(basis, ha)
    gamma, rg = _lstsq2(basis, hF)
    a1, a2 = alpha
    b1, b2 = beta
    g1, g2 = gamma
    if variant == "case1":
        cons = (g2 - b1 + g1 * a1, b2 - g1 * a2)
        lam = (g2, g1)
    else:
        cons = (b2 - g1 + b1 * a1, g2 - b1 * a2)
        lam = (b1, b2)
    coef_scale = 1.0 + max(abs(x) for x in (a1, a2, b1, b2, g1, g2))
    consistent = max(abs(c) for c in cons) <= consistency_tol * coef_scale ** 2
    l1, l2 = lam
    lam_res = float(max(np.max(np.abs(ha - l1 * h - l2 * ai)), np.max(np.abs(hF - l1 * r - l2 * h))))
    return PlanarCoefficients(variant, tuple(map(float, alpha)), tuple(map(float, beta)),
                              tuple(map(float, gamma)), float(max(ra, rb, rg)),
                              tuple(map(float, cons)), bool(consistent), tuple(map(float, lam)), lam_res)


def span_basis(matrices, rel_tol: float = DEFAULT_RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis (two 3x2 matrices) of the span of a plane of matrices."""
    M = np.asarray(matrices, dtype=float).reshape(-1, 6)
    if numeric_rank(M, rel_tol).rank != 2:
        raise WrongRegimeError("matrices do not span a plane")
    _, _, Vt = np.linalg.svd(M)
    return Vt[0].reshape(3, 2), Vt[1].reshape(3, 2)


_ROWS = ((0, 1), (0, 2), (1, 2))


def minor_forms(B1, B2) -> np.ndarray:
    """Coefficients (A, B, C) of each minor of s B1 + t B2 as A s^2 + B s t + C t^2.

    Returns a 3 x 3 array, one row per row pair (12, 13, 23).
    """
    B1, B2 = np.asarray(B1, dtype=float), np.asarray(B2, dtype=float)
    out = []
    for p, q in _ROWS:
        A = B1[p, 0] * B1[q, 1] - B1[p, 1] * B1[q, 0]
        C = B2[p, 0] * B2[q, 1] - B2[p, 1] * B2[q, 0]
        B = B1[p, 0] * B2[q, 1] + B2[p, 0] * B1[q, 1] - B1[p, 1] * B2[q, 0] - B2[p, 1] * B1[q, 0]
        out.append((A, B, C))
    return np.array(out)


def _projective_roots(A: float, B: float, C: float, zero: float, disc_rel: float = 1e-12) -> list:
    """Angles in [0, pi) of the real projective zeros of A s^2 + B s t + C t^2.

    (s, t) = (cos theta, sin theta). The point t = 0 is checked separately;
    the remaining roots come from the chart t = 1.
    """
    roots = []
    if abs(A) <= zero:
        roots.append(0.0)
        if abs(B) > zero:
            roots.append(math.atan2(1.0, -C / B) % math.pi)
        return roots
    disc = B * B - 4.0 * A * C
    if disc < -disc_rel * (B * B + abs(4.0 * A * C)):
        return roots
    sq = math.sqrt(max(disc, 0.0))
    if sq <= math.sqrt(disc_rel * (B * B + abs(4.0 * A * C))):
        s_vals = [-B / (2.0 * A)]
    else:
        q = -0.5 * (B + math.copysign(sq, B))
        s_vals = [q / A, C / q] if q != 0 else [0.0]
    for s in s_vals:
        roots.append(math.atan2(1.0, s) % math.pi)
    return roots


def _angle_dist(x: float, y: float) -> float:
    d = abs(x - y) % math.pi
    return min(d, math.pi - d)


@dataclass
class RankOneDirections:
    count: int | None                # None when every direction is rank-one
    infinite: bool
    angles: list
    directions: list                 # unit (s, t) pairs

    def as_dict(self) -> dict:
        return {"count": "inf" if self.infinite else self.count, "angles": self.angles,
                "directions": [list(d) for d in self.directions]}


def rank_one_directions(B1, B2, tol: float = ANGLE_TOL, rel_tol: float = DEFAULT_RANK_TOL) -> RankOneDirections:
    """Directions (s, t) for which s B1 + t B2 has rank <= 1.

    Each minor is a binary quadratic form; a direction is rank-one when it is
    a common projective zero of all three. Roots of different minors are
    matched within ``tol`` radians.
    """
    B1, B2 = np.asarray(B1, dtype=float), np.asarray(B2, dtype=float)
    if B1.shape != (3, 2) or B2.shape != (3, 2):
        raise InvalidInputError("basis matrices must be 3x2")
    if numeric_rank(np.vstack([B1.ravel(), B2.ravel()]), rel_tol).rank != 2:
        raise InvalidInputError("basis matrices are linearly dependent")
    forms = minor_forms(B1, B2)
    scale = float(np.max(np.abs(forms)))
    scale = max(scale, np.linalg.norm(B1) * np.linalg.norm(B2), np.finfo(float).tiny)
    zero = 1e-13 * scale
    active = [f for f in forms if np.max(np.abs(f)) > zero]
    if not active:
        return RankOneDirections(None, True, [], [])
    root_sets = [_projective_roots(*f, zero=zero) for f in active]
    common = []
    for th in root_sets[0]:
        if all(any(_angle_dist(th, o) <= tol for o in other) for other in root_sets[1:]):
            if not any(_angle_dist(th, c) <= tol for c in common):
                common.append(th)
    common.sort()
    return RankOneDirections(len(common), False, common, [(math.cos(a), math.sin(a)) for a in common])
