import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ml2r.weights import (
    InvalidParameterError, WeightTable, closed_form_coeffs, dense_vandermonde_weights,
    ml2r_weights, mlmc_weights, truncation_tail_bound, vandermonde_residual, weight_bound,
    weight_limits, weighted_geometric_sum,
)

alphas = st.sampled_from([0.5, 1.0, 2.0])
roots = st.integers(2, 5)


def test_coeffs_small_cases():
    a, b = closed_form_coeffs(1.0, 2, 1)
    assert a.tolist() == [1.0] and b.tolist() == [1.0]
    a, b = closed_form_coeffs(1.0, 2, 3)
    np.testing.assert_allclose(a, [1, 2, 8 / 3], rtol=1e-15)
    np.testing.assert_allclose(b, [1, -1, 1 / 3], rtol=1e-15)


@pytest.mark.parametrize("R, w, W", [
    (1, [1], [1]),
    (2, [-1, 2], [1, 2]),
    (3, [1 / 3, -2, 8 / 3], [1, 2 / 3, 8 / 3]),
])
def test_hand_solved_systems(R, w, W):
    t = ml2r_weights(1.0, 2, R)
    np.testing.assert_allclose(t.w, w, atol=1e-14)
    np.testing.assert_allclose(t.W, W, atol=1e-14)


def test_matches_dense_solve():
    for alpha in (0.5, 1.0, 2.0):
        for M in (2, 3):
            for R in range(1, 6):
                np.testing.assert_allclose(ml2r_weights(alpha, M, R).w,
                                           dense_vandermonde_weights(alpha, M, R),
                                           rtol=1e-8, atol=1e-10)


def test_residual_examples():
    assert vandermonde_residual(ml2r_weights(1.0, 2, 3)) <= 1e-10
    assert vandermonde_residual(ml2r_weights(1.0, 2, 1)) == 0.0
    t = ml2r_weights(1.0, 2, 3)
    w = t.w.copy()
    w[-1] += 0.1
    bad = WeightTable(t.alpha, t.M, t.R, w, np.cumsum(w[::-1])[::-1], t.a, t.b)
    # n_R = 4; smallest row factor is 4^{-2}
    assert vandermonde_residual(bad) >= 0.1 * 4.0 ** -2


def test_mlmc_weights_are_ones():
    t = mlmc_weights(1.0, 2, 6)
    assert t.W.tolist() == [1.0] * 6


def test_invalid_parameters():
    for args in [(0.0, 2, 3), (1.0, 1, 3), (1.0, 2, 0), (-1.0, 2, 2)]:
        with pytest.raises(InvalidParameterError):
            ml2r_weights(*args)


def test_geometric_sums():
    t1 = ml2r_weights(1.0, 2, 1)
    assert weighted_geometric_sum(t1, -1.0) == 0.0
    assert abs(weighted_geometric_sum(ml2r_weights(1.0, 2, 25), -1.0) - 1.0) <= 0.01
    assert abs(weighted_geometric_sum(ml2r_weights(1.0, 2, 40), 0.0) / 40 - 1) <= 0.05


def test_limits_and_tail():
    a_inf, bt_inf, b_inf = weight_limits(1.0, 2)
    assert a_inf > 1 and bt_inf > 1 and 0 < b_inf < bt_inf
    for alpha in (0.5, 1.0, 2.0):
        for M in (2, 3, 4, 5):
            assert truncation_tail_bound(alpha, M) < 1e-12


def test_pointwise_convergence():
    a_inf = weight_limits(1.0, 2)[0]
    t = ml2r_weights(1.0, 2, 30)
    assert abs(t.W[1] - 1) < 1e-3
    assert abs(t.W[-1] - a_inf) < 1e-3


def test_tables_are_immutable():
    t = ml2r_weights(1.0, 2, 4)
    with pytest.raises(ValueError):
        t.w[0] = 5.0


@settings(max_examples=60, deadline=None)
@given(alpha=alphas, M=roots, R=st.integers(1, 20))
def test_vandermonde_rows(alpha, M, R):
    t = ml2r_weights(alpha, M, R)
    assert vandermonde_residual(t) <= 1e-8
    assert abs(t.W[0] - 1) <= 1e-12
    # suffix-sum recursion holds bit for bit
    assert np.array_equal(t.W[:-1], t.W[1:] + t.w[:-1])
    assert t.W[-1] == t.w[-1]


@settings(max_examples=60, deadline=None)
@given(alpha=alphas, M=roots, R=st.integers(1, 20))
def test_closed_form_product(alpha, M, R):
    t = ml2r_weights(alpha, M, R)
    a, b = t.a, t.b
    for l in range(1, R + 1):
        assert t.w[l - 1] == pytest.approx(a[l - 1] * b[R - l], rel=1e-14, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(alpha=alphas, M=roots, R=st.integers(1, 20))
def test_weights_bounded(alpha, M, R):
    t = ml2r_weights(alpha, M, R)
    a, b = closed_form_coeffs(alpha, M, 51)
    assert np.abs(t.W).max() <= a[50] * np.abs(b).sum() + 1e-6
    assert np.abs(t.W).max() <= weight_bound(alpha, M) + 1e-6
