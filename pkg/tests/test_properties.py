"""Hypothesis-driven invariants across modules."""
import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tnlab.entropy_system import SystemSpec, solve_degenerate, system_residual
from tnlab.ka import KaConfig, lift, row_reduced, sign_table_for, translate
from tnlab.linalg import numeric_rank
from tnlab.models import ExpModel
from tnlab.tn import MatrixSet, sign_change_filter

EXP = ExpModel()
coord = st.floats(-3, 2, allow_nan=False)
lam = st.floats(-3, 3, allow_nan=False).filter(lambda x: abs(x) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord)
def test_distinct_lifts_never_rank_one_connected(u1, v1, u2, v2):
    assume(max(abs(u1 - u2), abs(v1 - v2)) > 1e-4)
    assert numeric_rank(lift(EXP, u1, v1) - lift(EXP, u2, v2)).rank == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(coord, coord), min_size=3, max_size=7, unique=True))
def test_translation_identity(points):
    P = np.array(points)
    assume(np.min(np.abs(P[:, None] - P[None]).max(axis=-1) + np.eye(len(P))) > 1e-6)
    cfg = KaConfig(P, EXP)
    for i in range(cfg.N):
        T, R = translate(cfg, i).matrix(), row_reduced(cfg, i)
        assert np.max(np.abs(T - R)) <= 1e-9 * (1 + np.max(np.abs(R)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(coord, coord), min_size=4, max_size=7, unique=True), st.integers(0, 2**32 - 1))
def test_sign_table_matches_filter_on_rows_12(points, seed):
    P = np.array(points)
    assume(np.min(np.abs(P[:, None] - P[None]).max(axis=-1) + np.eye(len(P))) > 1e-6)
    cfg = KaConfig(P, EXP)
    table = sign_table_for(cfg)
    filt = sign_change_filter(MatrixSet(cfg.points), (1, 2))
    assert np.allclose(table.values, filt.determinants, atol=1e-9 * (1 + np.max(np.abs(table.values))))


@settings(max_examples=100, deadline=None)
@given(lam, st.booleans())
def test_degenerate_solutions_bounded_and_exact(l, first_zero):
    spec = SystemSpec(EXP, 0.0, l) if first_zero else SystemSpec(EXP, l, 0.0)
    sols = solve_degenerate(spec)
    assert len(sols) <= 4
    for x in sols.solutions:
        assert system_residual(spec, x.s, x.t) <= 1e-9
