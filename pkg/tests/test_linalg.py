import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tnlab.errors import InvalidInputError
from tnlab.linalg import (as_mat3x2, best_rank_one, check_selector, equilibrate_columns, is_rank_one,
                          minor_det, minors, numeric_rank)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_rank_of_simple_matrices():
    assert numeric_rank(np.zeros((3, 2))).rank == 0
    assert numeric_rank(np.eye(3, 2)).rank == 2
    assert numeric_rank(np.outer([1.0, 2.0, 3.0], [4.0, -1.0])).rank == 1


def test_rank_report_fields():
    rep = numeric_rank(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-12], [2.0, 2.0]]))
    assert rep.rank == 1
    assert rep.tolerance_used == pytest.approx(1e-8 * rep.singular_values[0])
    assert rep.as_dict()["rank"] == 1


def test_equilibration_rescues_badly_scaled_columns():
    M = np.array([[1.0, 0.0], [0.0, 1e-10], [0.0, 0.0]])
    assert numeric_rank(M).rank == 2
    assert np.allclose(np.max(np.abs(equilibrate_columns(M)), axis=0), 1.0)


def test_precise_rank_path():
    M = np.array([[1.0, 2, 3], [2, 4, 6 + 2e-8], [1, 1, 1]])
    rep = numeric_rank(M, precise=True)
    assert rep.precise
    assert rep.rank == numeric_rank(M).rank


@pytest.mark.parametrize("bad", [np.array([[np.nan, 0.0]]), np.zeros(3)])
def test_rank_rejects_bad_input(bad):
    with pytest.raises(InvalidInputError):
        numeric_rank(bad)


def test_selector_validation():
    assert check_selector((1, 3)) == (1, 3)
    for bad in [(2, 1), (0, 1), (1, 4), (1,), "xy"]:
        with pytest.raises(InvalidInputError):
            check_selector(bad)
    with pytest.raises(InvalidInputError):
        as_mat3x2(np.zeros((2, 3)))


def test_minor_det_matches_minors():
    M = np.arange(6.0).reshape(3, 2) ** 2
    assert [minor_det(M, z) for z in [(1, 2), (1, 3), (2, 3)]] == pytest.approx(list(minors(M)))


def test_rank_one_products_seeded():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        M = np.outer(rng.normal(size=3), rng.normal(size=2))
        assert numeric_rank(M).rank == 1
        assert is_rank_one(M)


def test_full_rank_seeded():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        assert numeric_rank(rng.normal(size=(3, 2))).rank == 2


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=2))
def test_rank_invariant_under_column_scaling(entries, scale):
    M = np.array(entries).reshape(3, 2)
    assert numeric_rank(M).rank == numeric_rank(M * np.array(scale)).rank


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6))
def test_minor_antisymmetric_under_column_swap(entries):
    M = np.array(entries).reshape(3, 2)
    assert np.allclose(minors(M[:, ::-1]), -minors(M), atol=1e-9 * (1 + np.abs(M).max() ** 2))


def test_best_rank_one_projection():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(3, 2))
    R = best_rank_one(M)
    assert is_rank_one(R)
    s = np.linalg.svd(M, compute_uv=False)
    assert np.linalg.norm(M - R) == pytest.approx(s[1])
