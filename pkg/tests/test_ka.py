import numpy as np
import pytest

from tnlab.errors import InvalidInputError, RankDeficiencyError
from tnlab.ka import (KaConfig, build_A, build_Pi, case_analysis, dedup_params, fit_lambdas, lift, lift_many,
                      rank_condition, row_reduced, sign_table, sign_table_for, translate)
from tnlab.linalg import minor_det
from tnlab.models import AppendixModel, ExpModel

EXP = ExpModel()


def random_config(rng, N, model=EXP):
    return KaConfig(np.column_stack([rng.uniform(-2, 2, N), rng.uniform(-2, 1, N)]), model)


def test_lift_layout():
    P = lift(EXP, 2.0, 0.5)
    a, F = np.expm1(0.5), np.expm1(0.5) - 0.5
    assert np.allclose(P, [[2.0, 0.5], [a, 2.0], [2.0 * a, 2.0 + F]])


def test_build_A_columns():
    cfg = random_config(np.random.default_rng(0), 5)
    A = build_A(cfg)
    assert A.shape == (3, 10)
    X = lift_many(EXP, cfg.params)
    assert np.allclose(A[:, :5], X[:, :, 0].T)
    assert np.allclose(A[:, 5:], X[:, :, 1].T)
    Q = np.arange(6.0).reshape(3, 2)
    Pi = build_Pi(Q, 5)
    assert np.allclose(Pi[:, :5], Q[:, [0]]) and np.allclose(Pi[:, 5:], Q[:, [1]])


def test_duplicates_rejected_and_deduplicated():
    pts = [[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]
    with pytest.raises(InvalidInputError):
        KaConfig(np.array(pts), EXP)
    kept, dropped = dedup_params(EXP, pts)
    assert dropped == [2] and len(kept) == 2


def test_translation_matches_row_reduction_seeded():
    rng = np.random.default_rng(3)
    for _ in range(20):
        cfg = random_config(rng, int(rng.integers(2, 8)))
        for i in range(cfg.N):
            T = translate(cfg, i).matrix()
            R = row_reduced(cfg, i)
            assert np.max(np.abs(T - R)) <= 1e-10 * max(1.0, np.max(np.abs(R)))


def test_fit_lambdas_recovers_system_coefficients(appendix_config):
    # the trivial solution sits at the origin, so its pivot sees the system coefficients directly
    cfg = appendix_config
    i0 = int(np.argmin(np.abs(cfg.params).sum(axis=1)))
    fit = fit_lambdas(translate(cfg, i0))
    assert fit.lambda1 == pytest.approx(-0.5, abs=1e-12)
    assert fit.lambda2 == pytest.approx(0.1, abs=1e-12)
    for i in range(cfg.N):
        assert fit_lambdas(translate(cfg, i)).relative_residual < 1e-12


def test_fit_lambdas_rejects_equal_v():
    cfg = KaConfig(np.array([[0.0, 0.3], [1.0, 0.3], [2.5, 0.3], [-1.0, 0.3]]), EXP)
    with pytest.raises(RankDeficiencyError):
        fit_lambdas(translate(cfg, 0))


def test_sign_table_symmetric_and_pivot_free():
    rng = np.random.default_rng(4)
    cfg = random_config(rng, 6)
    tables = [sign_table(translate(cfg, i)).values for i in range(cfg.N)]
    for T in tables[1:]:
        assert np.allclose(T, tables[0], atol=1e-12)
    assert np.allclose(tables[0], tables[0].T)
    X = lift_many(EXP, cfg.params)
    for i in range(6):
        for j in range(6):
            assert tables[0][i, j] == pytest.approx(minor_det(X[j] - X[i], (1, 2)), abs=1e-12)


def test_sign_table_invariant_under_u_shift_and_permutation():
    rng = np.random.default_rng(5)
    cfg = random_config(rng, 5)
    base = sign_table_for(cfg).values
    shifted = KaConfig(cfg.params + [3.7, 0.0], EXP)
    assert np.allclose(sign_table_for(shifted).values, base, atol=1e-12)
    perm = rng.permutation(5)
    permuted = KaConfig(cfg.params[perm], EXP)
    assert np.allclose(sign_table_for(permuted).values, base[np.ix_(perm, perm)], atol=1e-12)


def test_appendix_table_and_case(appendix_config):
    table = sign_table_for(appendix_config)
    assert table.degenerate_pairs == []
    order = list(table.order)
    assert [table.row_sign(i) for i in order] == ["mixed"] * 3 + ["negative"] * 3
    ca = case_analysis(appendix_config, table)
    assert ca["case"] == 3
    assert ca["witness"] == order[-1]
    md = table.to_markdown()
    assert md.splitlines()[0].startswith("| D | 1 |")
    assert rank_condition(appendix_config).rank == 2


def test_appendix_model_config_pairs_distinct():
    m = AppendixModel(1e8)
    cfg = KaConfig(np.array([[0.0, 0.0], [0.1, 0.002]]), m)
    assert rank_condition(cfg).rank == 2


def _solution_configs(rng, count):
    from tnlab.entropy_system import SystemSpec, solve
    out = []
    while len(out) < count:
        l1, l2 = rng.uniform(-3, 3, 2)
        spec = SystemSpec(EXP, float(l1), float(l2))
        sols = solve(spec, [(-20.0, 5.0)], 20_000)
        if len(sols) >= 3:
            out.append(KaConfig(sols.st, EXP))
    return out


def test_case_one_first_row_negative():
    rng = np.random.default_rng(12)
    hits = 0
    for cfg in _solution_configs(rng, 40):
        ca = case_analysis(cfg)
        if ca["case"] == 1:
            hits += 1
            assert sign_table_for(cfg).row_sign(ca["order_by_v"][0]) == "negative"
    assert hits > 0


def test_translated_a_avoids_fitted_lambda1():
    rng = np.random.default_rng(13)
    for cfg in _solution_configs(rng, 20):
        for i in range(cfg.N):
            t = translate(cfg, i)
            fit = fit_lambdas(t)
            if fit.relative_residual <= 1e-8 and fit.lambda1 != 0 and fit.lambda2 != 0:
                assert np.all(np.abs(t.a_i_of_r - fit.lambda1) > 1e-9 * abs(fit.lambda1))
