import math

import numpy as np
import pytest

from oracles import grid_sign_changes, pq_oracle_brackets
from tnlab.appendix import appendix_spec, interval_counts, pq_checks
from tnlab.entropy_system import (SystemSpec, structure_check, pq_values, reduce_u, singular_point, solve,
                                  solve_degenerate, split_brackets, system_residual, tails_root_free)
from tnlab.errors import InvalidInputError, SingularityError, WrongRouteError
from tnlab.models import ExpModel

EXP = ExpModel()


def test_reduction_consistency():
    spec = SystemSpec(EXP, 0.7, -0.4)
    v = np.linspace(-3, 2, 11)
    v = v[np.abs(np.expm1(v) - 0.7) > 1e-3]
    u = reduce_u(spec, v)
    a, F = np.expm1(v), np.expm1(v) - v
    # first equation holds identically for the reduced u
    assert np.allclose(u * a, 0.7 * u - 0.4 * a)
    p, q = pq_values(spec, v)
    second = 0.5 * u * u + F - 0.7 * v + 0.4 * u
    # second equation equals p - q up to the identity used in the reduction
    assert np.allclose(second, p - q)


def test_singular_point_and_split():
    spec = SystemSpec(EXP, 0.7, -0.4)
    t0 = singular_point(spec)
    assert t0 == pytest.approx(math.log(1.7), abs=1e-12)
    parts = split_brackets(spec, -5, 5)
    assert all(not (a < t0 < b) and not (a < 0 < b) for a, b in parts)
    with pytest.raises(SingularityError):
        reduce_u(spec, t0)


def test_appendix_solutions(appendix_solutions):
    spec, sols = appendix_solutions
    assert len(sols) == 6
    counts = interval_counts(sols.st[:, 1])
    assert counts["below_ln_half"] == 2 and counts["ln_half_to_zero"] == 2
    assert counts["zero_to_0.003"] == 1 and counts["above_0.003"] == 1
    for x in sols.solutions:
        assert x.residual <= 1e-9
        assert system_residual(spec, x.s, x.t) == pytest.approx(x.residual)
    assert any(x.trivial for x in sols.solutions)
    assert tails_root_free(spec, -40.0, 1.0) == (True, True)
    assert structure_check(spec, sols).passed


def test_appendix_pq_checks():
    checks = pq_checks(appendix_spec())
    assert all(checks[k]["p_lt_q"] for k in ("-1", "-0.3", "0.003"))
    assert checks["0"]["abs_diff"] <= 1e-12


def test_solve_matches_dense_oracle_on_exp_specs():
    rng = np.random.default_rng(11)
    for _ in range(10):
        l1, l2 = rng.uniform(-3, 3, 2)
        spec = SystemSpec(EXP, float(l1), float(l2))
        sols = solve(spec, [(-30.0, 5.0)], 50_000)
        ts = [x.t for x in sols.solutions if not x.trivial]
        oracle = [b for b in pq_oracle_brackets(EXP, l1, l2, -30.0, 5.0, 200_000) if not (b[0] <= 0.0 <= b[1])]
        assert len(oracle) == len(ts)
        for a, b in oracle:
            assert any(a - 1e-12 <= t <= b + 1e-12 for t in ts)


def test_solve_errors():
    spec = SystemSpec(EXP, 0.5, 0.5)
    with pytest.raises(InvalidInputError):
        solve(spec, [(1.0, -1.0)])
    with pytest.raises(WrongRouteError):
        solve(SystemSpec(EXP, 0.0, 1.0), [(-1.0, 1.0)])
    with pytest.raises(WrongRouteError):
        solve_degenerate(spec)


def test_no_roots_is_empty_not_error():
    spec = SystemSpec(EXP, 0.5, 0.5)
    assert len(solve(spec, [(2.0, 3.0)], 1000)) == 0


def test_unnormalized_model_rejected():
    class Shifted(ExpModel):
        def a(self, t):
            return np.exp(t)
    with pytest.raises(InvalidInputError):
        SystemSpec(Shifted(), 0.5, 0.5)


@pytest.mark.parametrize("l1,l2,expected", [(0.0, 1.0, 4), (-2.0, 0.0, 1), (1.0, 0.0, 4)])
def test_degenerate_counts(l1, l2, expected):
    spec = SystemSpec(EXP, l1, l2)
    sols = solve_degenerate(spec)
    assert len(sols) == expected
    for x in sols.solutions:
        assert x.residual <= 1e-9


def test_degenerate_branch_oracle():
    spec = SystemSpec(EXP, 0.0, 1.0)
    sols = solve_degenerate(spec)
    s_branch = sorted(x.t for x in sols.solutions if x.branch == "s=lambda2")
    oracle = grid_sign_changes(lambda t: np.expm1(t) - t - 0.5, -20, 5, 100_000)
    assert len(oracle) == len(s_branch) == 2
    for (a, b), t in zip(oracle, s_branch):
        assert a <= t <= b
