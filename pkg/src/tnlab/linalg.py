"""Small dense real matrix utilities.

Everything here works on tiny matrices (at most 5 x 2N for N <= 8), so the
routines favour clarity over speed. Ranks are computed from singular values
after max-abs column equilibration; see :func:`numeric_rank`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

DEFAULT_RANK_TOL = 1e-8

MinorSelector = tuple[int, int]


@dataclass(frozen=True)
class RankReport:
    rank: int
    singular_values: np.ndarray
    tolerance_used: float
    precise: bool = False

    def as_dict(self) -> dict:
        return {
            "rank": self.rank,
            "singular_values": [float(s) for s in self.singular_values],
            "tolerance_used": self.tolerance_used,
            "precise": self.precise,
        }


def as_mat3x2(M) -> np.ndarray:
    """Validate and return ``M`` as a finite float 3x2 array."""
    A = np.asarray(M, dtype=float)
    if A.shape != (3, 2):
        raise InvalidInputError(f"expected a 3x2 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def check_selector(Z) -> MinorSelector:
    """Return ``Z`` as an ascending pair of 1-based row indices from {1, 2, 3}."""
    try:
        z = tuple(int(k) for k in Z)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad row selector {Z!r}") from exc
    if len(z) != 2 or not (1 <= z[0] < z[1] <= 3):
        raise InvalidInputError(f"row selector must be two ascending indices in 1..3, got {Z!r}")
    return z


def equilibrate_columns(M: np.ndarray) -> np.ndarray:
    """Scale each column by its max-abs entry; zero columns are left untouched."""
    scale = np.max(np.abs(M), axis=0)
    scale[scale == 0.0] = 1.0
    return M / scale


def _precise_singular_values(M: np.ndarray, dps: int) -> np.ndarray:
    import mpmath

    with mpmath.workdps(dps):
        A = mpmath.matrix(M.tolist())
        if A.rows < A.cols:
            A = A.T
        s = mpmath.svd_r(A, compute_uv=False)
        return np.array(sorted((float(x) for x in s), reverse=True))


def numeric_rank(M, rel_tol: float = DEFAULT_RANK_TOL, precise: bool = False,
                 precise_band: float = 100.0, dps: int = 50) -> RankReport:
    """Numerical rank of a small dense matrix.

    Columns are equilibrated before the SVD and the reported singular values
    are those of the equilibrated matrix. A singular value counts toward the
    rank when it exceeds ``rel_tol * sigma_max``.

    With ``precise=True``, any singular value within a factor ``precise_band``
    of the threshold triggers a re-decomposition of the same (equilibrated)
    entries in ``dps``-digit arithmetic; the stored floats are not refined.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    if rel_tol <= 0:
        raise InvalidInputError("rel_tol must be positive")
    if A.size == 0:
        return RankReport(0, np.zeros(0), 0.0)

    E = equilibrate_columns(A)
    s = np.linalg.svd(E, compute_uv=False)
    used_precise = False
    if s[0] > 0 and precise:
        thresh = rel_tol * s[0]
        near = (s > thresh / precise_band) & (s < thresh * precise_band)
        if np.any(near):
            s = _precise_singular_values(E, dps)
            used_precise = True
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return RankReport(0, s, 0.0, used_precise)
    tol = rel_tol * smax
    return RankReport(int(np.count_nonzero(s > tol)), s, float(tol), used_precise)


def minor_det(M, Z: MinorSelector) -> float:
    """Determinant of the 2x2 submatrix of rows ``Z`` (1-based, ascending)."""
    A = as_mat3x2(M)
    p, q = check_selector(Z)
    B = A[[p - 1, q - 1], :]
    return float(B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0])


def minors(M) -> np.ndarray:
    """All three 2x2 minors of a 3x2 matrix, ordered (12, 13, 23)."""
    A = np.asarray(M, dtype=float)
    return np.array([
        A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0],
        A[0, 0] * A[2, 1] - A[0, 1] * A[2, 0],
        A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0],
    ])


def is_rank_one(M, rel_tol: float = DEFAULT_RANK_TOL) -> bool:
    return numeric_rank(as_mat3x2(M), rel_tol).rank == 1


def best_rank_one(M) -> np.ndarray:
    """Nearest rank-one matrix in the Frobenius norm (truncated SVD)."""
    A = np.asarray(M, dtype=float)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return s[0] * np.outer(U[:, 0], Vt[0])
