"""T_N configurations of 3x2 matrices: certificates, necessary conditions, search.

A certificate for an ordered set X_1..X_N is (P, C_1..C_N, kappa_1..kappa_N) with

    X_i = P + C_1 + ... + C_{i-1} + kappa_i C_i,   rank C_i = 1,
    C_1 + ... + C_N = 0,                           kappa_i > 1.

Only necessary conditions are decided here; :func:`search_certificate` is a
semi-decision procedure whose empty result proves nothing.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import InvalidInputError, UnsupportedSizeError
from .linalg import DEFAULT_RANK_TOL, best_rank_one, check_selector, numeric_rank

KAPPA_MARGIN = 1e-9
ACCEPT_TOL = 1e-10
SIGN_TOL = 1e-12
MAX_EXHAUSTIVE_N = 8


@dataclass
class MatrixSet:
    points: np.ndarray
    labels: list | None = None
    dedup_tol: float = 1e-12

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        if X.ndim != 3 or X.shape[1:] != (3, 2):
            raise InvalidInputError(f"expected an (N, 3, 2) stack of matrices, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("matrices have non-finite entries")
        for i in range(len(X)):
            for j in range(i):
                if np.max(np.abs(X[i] - X[j])) <= self.dedup_tol:
                    raise InvalidInputError(f"matrices {j} and {i} coincide")
        self.points = X
        if self.labels is None:
            self.labels = list(range(len(X)))
        elif len(self.labels) != len(X):
            raise InvalidInputError("labels and points differ in length")

    def __len__(self) -> int:
        return len(self.points)

    def reordered(self, order) -> "MatrixSet":
        order = list(order)
        return MatrixSet(self.points[order], [self.labels[k] for k in order], self.dedup_tol)


@dataclass
class TnCertificate:
    base: np.ndarray
    increments: np.ndarray
    multipliers: np.ndarray

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.increments = np.asarray(self.increments, dtype=float)
        self.multipliers = np.asarray(self.multipliers, dtype=float).ravel()
        if self.base.shape != (3, 2) or self.increments.ndim != 3 or self.increments.shape[1:] != (3, 2):
            raise InvalidInputError("certificate needs a 3x2 base and an (N, 3, 2) stack of increments")
        if len(self.increments) != len(self.multipliers):
            raise InvalidInputError("increments and multipliers differ in length")

    def points(self) -> np.ndarray:
        """The matrices this certificate generates, in order."""
        partial = self.base + np.concatenate([np.zeros((1, 3, 2)), np.cumsum(self.increments, axis=0)[:-1]])
        return partial + self.multipliers[:, None, None] * self.increments

    def rotated(self, shift: int = 1) -> "TnCertificate":
        """Certificate of the cyclically rotated ordering (base moves by C_1 + ... + C_shift)."""
        shift %= len(self.multipliers)
        base = self.base + self.increments[:shift].sum(axis=0)
        return TnCertificate(base, np.roll(self.increments, -shift, axis=0), np.roll(self.multipliers, -shift))

    def as_dict(self) -> dict:
        return {"base": self.base.tolist(), "increments": self.increments.tolist(),
                "multipliers": self.multipliers.tolist()}


def verification_failures(mset: MatrixSet, cert: TnCertificate, tol: float = ACCEPT_TOL,
                          rel_tol: float = DEFAULT_RANK_TOL, kappa_margin: float = KAPPA_MARGIN) -> list[str]:
    """Reasons a certificate is rejected; empty when it is accepted."""
    N = len(mset)
    if len(cert.multipliers) != N:
        raise InvalidInputError(f"certificate has {len(cert.multipliers)} increments for {N} matrices")
    out = []
    if N < 4:
        out.append("fewer than 4 matrices")
    res = float(np.max(np.abs(cert.points() - mset.points)))
    if not res <= tol:
        out.append(f"telescoping residual {res:.3g} > {tol:g}")
    for k, C in enumerate(cert.increments):
        if numeric_rank(C, rel_tol).rank != 1:
            out.append(f"increment {k} is not rank one")
    total = float(np.max(np.abs(cert.increments.sum(axis=0))))
    if not total < tol:
        out.append(f"increments sum to {total:.3g}, not 0")
    for k, kap in enumerate(cert.multipliers):
        if not kap >= 1.0 + kappa_margin:
            out.append(f"multiplier {k} = {kap!r} is not > 1")
    X = mset.points
    for i in range(N):
        for j in range(i + 1, N):
            if numeric_rank(X[i] - X[j], rel_tol).rank != 2:
                out.append(f"matrices {i} and {j} are rank-one connected")
    return out


def verify_certificate(mset: MatrixSet, cert: TnCertificate, tol: float = ACCEPT_TOL,
                       rel_tol: float = DEFAULT_RANK_TOL) -> bool:
    return not verification_failures(mset, cert, tol, rel_tol)


@dataclass
class SignChangeReport:
    selector: tuple
    determinants: np.ndarray       # N x N, entry (i, j) = det(X_j^Z - X_i^Z)
    threshold: float
    summaries: list
    degenerate: np.ndarray         # boolean N x N

    @property
    def verdict(self) -> str:
        """'no-tn' (some index never changes sign), 'inconclusive' or 'consistent'."""
        if self.degenerate.any():
            return "inconclusive"
        if any(s in ("positive", "negative") for s in self.summaries):
            return "no-tn"
        return "consistent"

    @property
    def constant_sign_indices(self) -> list:
        return [i for i, s in enumerate(self.summaries) if s in ("positive", "negative")]

    def per_index(self, i: int) -> list:
        return [float(d) for j, d in enumerate(self.determinants[i]) if j != i]

    def as_dict(self) -> dict:
        N = len(self.summaries)
        return {
            "rows": list(self.selector),
            "threshold": self.threshold,
            "per_index": [{"index": i, "determinants": self.per_index(i), "summary": self.summaries[i],
                           "degenerate": [bool(self.degenerate[i, j]) for j in range(N) if j != i]}
                          for i in range(N)],
            "constant_sign_indices": self.constant_sign_indices,
            "verdict": self.verdict,
        }


def sign_change_filter(mset: MatrixSet, Z=(1, 2), tol: float = SIGN_TOL) -> SignChangeReport:
    """Order-independent necessary condition on the row-Z projections.

    Within a T_N configuration whose Z-projections have no rank-one
    connections, each {det(X_j^Z - X_i^Z) : j != i} must change sign. An
    index with constant sign therefore rules out every ordering. Entries with
    |det| <= tol * max|det| are degenerate; any degenerate entry makes the
    verdict inconclusive, since the projection hypothesis then fails.
    """
    N = len(mset)
    if N < 4:
        raise InvalidInputError("the sign-change condition needs N >= 4")
    p, q = check_selector(Z)
    Y = mset.points[:, [p - 1, q - 1], :]
    diff = Y[None, :, :, :] - Y[:, None, :, :]
    D = diff[..., 0, 0] * diff[..., 1, 1] - diff[..., 0, 1] * diff[..., 1, 0]
    scale = float(np.max(np.abs(D)))
    thresh = tol * scale
    off = ~np.eye(N, dtype=bool)
    degen = off & (np.abs(D) <= thresh)
    summaries = []
    for i in range(N):
        row = np.delete(D[i], i)
        if degen[i].any():
            summaries.append("degenerate")
        elif np.all(row > 0):
            summaries.append("positive")
        elif np.all(row < 0):
            summaries.append("negative")
        else:
            summaries.append("mixed")
    return SignChangeReport((p, q), D, thresh, summaries, degen)


def independence_filter(u_vec, v_vec, a_vec, tol: float = DEFAULT_RANK_TOL) -> bool:
    """True iff (u, v) or (u, a(v)) is a linearly independent pair.

    False means the set cannot be ordered into a T_N configuration (N >= 6).
    """
    u, v, a = (np.asarray(x, dtype=float).ravel() for x in (u_vec, v_vec, a_vec))
    if not (u.shape == v.shape == a.shape):
        raise InvalidInputError("u, v and a vectors must have equal length")
    return (numeric_rank(np.vstack([u, v]), tol).rank == 2
            or numeric_rank(np.vstack([u, a]), tol).rank == 2)


# ---------------------------------------------------------------- search

@dataclass
class SearchOptions:
    exhaustive: bool = True
    max_orderings: int | None = None
    n_starts: int = 6
    seed: int = 0
    tol: float = ACCEPT_TOL
    threads: int | None = None
    kappa_range: tuple = (1.05, 20.0)


@dataclass
class SearchResult:
    ordering: list | None
    certificate: TnCertificate | None
    orderings_tried: int
    best_residual: float
    details: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.certificate is not None

    def as_dict(self) -> dict:
        return {"found": self.found, "ordering": self.ordering,
                "certificate": None if self.certificate is None else self.certificate.as_dict(),
                "orderings_tried": self.orderings_tried, "best_residual": self.best_residual}


def _telescope_flat(Xf: np.ndarray, kappa: np.ndarray):
    """Fixed point P and increments C for flattened (N, 6) points.

    Unrolls P_{k+1} = c_k P_k + b_k with c = 1 - 1/kappa, b = X / kappa:
    P_k = (prod_{j<k} c_j) P + sum_{m<k} (prod_{m<j<k} c_j) b_m.
    Leading batch dimensions of ``kappa`` are carried through.
    """
    N = Xf.shape[0]
    b = Xf / kappa[..., :, None]
    lc = np.zeros(kappa.shape[:-1] + (N + 1,))
    np.cumsum(np.log1p(-1.0 / kappa), axis=-1, out=lc[..., 1:])
    D = lc[..., :, None] - lc[..., None, 1:]
    L = np.exp(np.where(np.tri(N + 1, N, -1, dtype=bool), D, -np.inf))
    Lb = L @ b
    P = Lb[..., N, :] / (1.0 - np.exp(lc[..., N]))[..., None]
    Ps = np.exp(lc)[..., None] * P[..., None, :] + Lb
    return P, np.diff(Ps, axis=-2)


def _telescope(X: np.ndarray, kappa: np.ndarray):
    N = len(X)
    P, C = _telescope_flat(X.reshape(N, -1), kappa)
    return P.reshape(X.shape[1:]), C.reshape(X.shape)


def certificate_from_kappas(X: np.ndarray, kappa: np.ndarray) -> TnCertificate:
    """The unique (P, C) solving the telescoping relations and sum(C) = 0 for fixed kappa.

    With P_1 = P and P_{i+1} = P_i + C_i, each relation reads
    P_{i+1} = (1 - 1/kappa_i) P_i + X_i / kappa_i, a cyclic affine recursion
    whose fixed point exists whenever every kappa_i > 1.
    """
    P, C = _telescope(X, kappa)
    return TnCertificate(P, C, np.array(kappa, dtype=float))


THETA_BOUND = 20.0


def _rank_residual(theta, Xf):
    kappa = 1.0 + np.exp(np.clip(theta, -THETA_BOUND, THETA_BOUND))
    _, C = _telescope_flat(Xf, kappa)
    c0, c1, c2, c3, c4, c5 = np.moveaxis(C, -1, 0)
    m = np.stack([c0 * c3 - c1 * c2, c0 * c5 - c1 * c4, c2 * c5 - c3 * c4], axis=-1)
    nrm = np.sum(C * C, axis=-1)
    nrm[nrm == 0] = 1.0
    out = m / nrm[..., None]
    return out.reshape(out.shape[:-2] + (-1,))


def _rank_jacobian(theta, Xf):
    # forward differences, all columns in one batched evaluation
    step = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(theta))
    T = np.vstack([theta, theta + np.diag(step)])
    R = _rank_residual(T, Xf)
    return ((R[1:] - R[0]) / step[:, None]).T


def _polish(X, cert: TnCertificate):
    """Refine all unknowns with every increment parametrised as an exact outer product."""
    N = len(X)
    a0, b0 = [], []
    for C in cert.increments:
        U, s, Vt = np.linalg.svd(C)
        a0.append(U[:, 0] * math.sqrt(s[0]))
        b0.append(Vt[0] * math.sqrt(s[0]))
    x0 = np.concatenate([cert.base.ravel(), np.ravel(a0), np.ravel(b0), np.log(np.maximum(cert.multipliers - 1.0, 1e-12))])

    def unpack(x):
        P = x[:6].reshape(3, 2)
        A = x[6:6 + 3 * N].reshape(N, 3)
        B = x[6 + 3 * N:6 + 5 * N].reshape(N, 2)
        kap = 1.0 + np.exp(np.clip(x[6 + 5 * N:], -THETA_BOUND, THETA_BOUND))
        return P, np.einsum("ni,nj->nij", A, B), kap

    def resid(x):
        P, C, kap = unpack(x)
        gen = TnCertificate(P, C, kap).points()
        return np.concatenate([(gen - X).ravel(), C.sum(axis=0).ravel()])

    sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    P, C, kap = unpack(sol.x)
    return TnCertificate(P, C, kap)


def _try_ordering(X: np.ndarray, opts: SearchOptions, seed: int):
    """Multi-start search over kappa for one fixed ordering; returns (cert or None, best residual)."""
    N = len(X)
    rng = np.random.default_rng(seed)
    lo, hi = opts.kappa_range
    starts = [np.full(N, 2.0)]
    starts += [np.exp(rng.uniform(math.log(lo), math.log(hi), N)) for _ in range(max(0, opts.n_starts - 1))]
    best = math.inf
    mset = MatrixSet(X)
    Xf = X.reshape(N, -1)
    for k0 in starts:
        theta0 = np.log(k0 - 1.0)
        try:
            sol = least_squares(_rank_residual, theta0, jac=_rank_jacobian, args=(Xf,), method="lm",
                                xtol=1e-12, ftol=1e-12, gtol=1e-14, max_nfev=20 * N)
        except (ValueError, np.linalg.LinAlgError, FloatingPointError):
            continue
        r = float(np.max(np.abs(sol.fun))) if np.all(np.isfinite(sol.fun)) else math.inf
        best = min(best, r)
        if not r < 1e-6:
            continue
        kappa = 1.0 + np.exp(np.clip(sol.x, -THETA_BOUND, THETA_BOUND))
        if not np.all(np.isfinite(kappa)):
            continue
        cert = certificate_from_kappas(X, kappa)
        cert = TnCertificate(cert.base, np.array([best_rank_one(C) for C in cert.increments]), cert.multipliers)
        if not verify_certificate(mset, cert, opts.tol):
            cert = _polish(X, cert)
        if verify_certificate(mset, cert, opts.tol):
            return cert, r
    return None, best


def _orderings(N: int, opts: SearchOptions):
    if opts.exhaustive:
        if N > MAX_EXHAUSTIVE_N:
            raise UnsupportedSizeError(f"exhaustive search supports N <= {MAX_EXHAUSTIVE_N}, got {N}")
        perms = ([0] + list(p) for p in itertools.permutations(range(1, N)))
        if opts.max_orderings is not None:
            perms = itertools.islice(perms, opts.max_orderings)
        return list(perms)
    count = opts.max_orderings or 1000
    rng = np.random.default_rng(opts.seed)
    seen, out = set(), []
    total = math.factorial(N - 1)
    while len(out) < min(count, total):
        p = (0,) + tuple(int(k) + 1 for k in rng.permutation(N - 1))
        if p not in seen:
            seen.add(p)
            out.append(list(p))
    return sorted(out)


def default_threads() -> int:
    env = os.environ.get("TNLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def search_certificate(mset: MatrixSet, opts: SearchOptions | None = None) -> SearchResult:
    """Look for an ordering and certificate; the first input matrix stays first.

    Orderings are enumerated in lexicographic order and the lexicographically
    smallest success is returned, independently of thread scheduling. An
    empty result is not a proof that no T_N ordering exists.
    """
    opts = SearchOptions() if opts is None else opts
    N = len(mset)
    if N < 4:
        raise InvalidInputError("a T_N configuration needs N >= 4")
    orders = _orderings(N, opts)
    threads = opts.threads or default_threads()

    def run(k):
        order = orders[k]
        cert, r = _try_ordering(mset.points[order], opts, opts.seed + k)
        return cert, r

    best = math.inf
    if threads <= 1:
        for k, order in enumerate(orders):
            cert, r = run(k)
            best = min(best, r)
            if cert is not None:
                return SearchResult(order, cert, k + 1, r)
        return SearchResult(None, None, len(orders), best)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        results = list(ex.map(run, range(len(orders))))
    for k, (cert, r) in enumerate(results):
        best = min(best, r)
        if cert is not None:
            return SearchResult(orders[k], cert, k + 1, r)
    return SearchResult(None, None, len(orders), best)
