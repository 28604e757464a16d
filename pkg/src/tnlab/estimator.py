"""scikit-learn style front ends.

``KaLifter`` maps (u, v) rows to flattened K_a matrices so it can sit in a
Pipeline; ``KaAnalyzer`` fits the rank / coefficient / sign-table analysis of
a point configuration and exposes the results as fitted attributes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import RankDeficiencyError
from .ka import KaConfig, case_analysis, fit_lambdas, lift_many, rank_condition, sign_table_for, translate
from .linalg import DEFAULT_RANK_TOL
from .models import ExpModel


class KaLifter(TransformerMixin, BaseEstimator):
    """Stateless transformer (u, v) -> the six entries of P(u, v), row-major."""

    def __init__(self, model=None):
        self.model = model

    def fit(self, X, y=None):
        check_array(X, ensure_min_features=2)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (u, v), got {X.shape[1]}")
        model = self.model if self.model is not None else ExpModel()
        return lift_many(model, X).reshape(len(X), 6)


class KaAnalyzer(BaseEstimator):
    """Analyse a configuration of K_a points given as rows (u_i, v_i).

    Fitted attributes
    -----------------
    rank_ : int, numeric rank of A_X - Pi^N(Q)
    lambdas_ : (N, 2) array of per-pivot coefficient fits (NaN where the fit is rank-deficient)
    sign_table_ : SignTable
    constant_sign_rows_ : list of row indices that never change sign
    verdict_ : "no T_<N> ordering" or "inconclusive"
    """

    def __init__(self, model=None, Q=None, rank_tol: float = DEFAULT_RANK_TOL, sign_tol: float = 1e-12):
        self.model = model
        self.Q = Q
        self.rank_tol = rank_tol
        self.sign_tol = sign_tol

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (u, v), got {X.shape[1]}")
        model = self.model if self.model is not None else ExpModel()
        config = KaConfig(X, model)
        self.n_features_in_ = 2
        self.rank_report_ = rank_condition(config, self.Q, self.rank_tol)
        self.rank_ = self.rank_report_.rank
        lam = np.full((config.N, 2), np.nan)
        for i in range(config.N):
            try:
                f = fit_lambdas(translate(config, i), self.rank_tol)
            except RankDeficiencyError:
                continue
            lam[i] = (f.lambda1, f.lambda2)
        self.lambdas_ = lam
        self.sign_table_ = sign_table_for(config, self.sign_tol)
        self.constant_sign_rows_ = list(self.sign_table_.constant_sign_rows)
        self.case_ = case_analysis(config, self.sign_table_, self.rank_tol)
        refutes = config.N >= 4 and self.constant_sign_rows_ and not self.sign_table_.degenerate_pairs
        self.verdict_ = f"no T_{config.N} ordering" if refutes else "inconclusive"
        return self
