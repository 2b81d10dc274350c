import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fupareto import mgda, numkit
from fupareto.exceptions import NumericError

from .oracles import simplex_grid_min


def two_point_closed_form(g1, g2):
    lam = np.clip((g2 - g1) @ g2 / ((g1 - g2) @ (g1 - g2)), 0, 1)
    return lam * g1 + (1 - lam) * g2


def test_orthogonal_pair():
    res = mgda.min_norm([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(res.weights, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(res.direction, [0.5, 0.5], atol=1e-12)
    assert res.direction_norm == pytest.approx(np.sqrt(2) / 2)
    assert not res.stationary


def test_matches_two_point_closed_form(rng):
    for _ in range(20):
        g1, g2 = rng.standard_normal((2, 6))
        res = mgda.min_norm([g1, g2])
        np.testing.assert_allclose(res.direction, two_point_closed_form(g1, g2),
                                   atol=1e-10)


def test_identical_columns(rng):
    g = rng.standard_normal(5)
    res = mgda.min_norm([g, g])
    assert res.direction_norm == pytest.approx(np.linalg.norm(g), rel=1e-12)


def test_opposite_columns_are_stationary():
    res = mgda.min_norm([[1.0, 0.0], [-1.0, 0.0]])
    assert res.direction_norm == pytest.approx(0, abs=1e-12)
    assert res.stationary


def test_single_column_is_returned_as_is(rng):
    g = rng.standard_normal(4)
    res = mgda.min_norm([g])
    np.testing.assert_array_equal(res.weights, [1.0])
    np.testing.assert_array_equal(res.direction, g)


def test_non_finite_gram():
    with pytest.raises(NumericError):
        mgda.min_norm([[np.nan, 1.0], [1.0, 1.0]])


def test_grid_oracle_equivalence(rng):
    for _ in range(20):
        G = rng.standard_normal((5, 3))
        res = mgda.min_norm(G)
        oracle = simplex_grid_min(numkit.gram(G))
        assert res.direction_norm ** 2 <= oracle + 1e-6


def test_badly_scaled_columns_reach_exact_optimum(rng):
    G = rng.standard_normal((40, 6)) * np.array([5.0, 3.0, 0.05, 0.02, 0.1, 0.01])
    res = mgda.min_norm(G)
    d = res.direction
    for i in range(6):
        assert d @ G[:, i] >= d @ d - 1e-12


def test_variational_inequality_and_common_descent(rng):
    for _ in range(50):
        G = rng.standard_normal((8, 4))
        res = mgda.min_norm(G)
        d = res.direction
        assert np.all(G.T @ d >= d @ d - 1e-8)
        if not res.stationary:
            assert mgda.is_common_descent(G, d)


def test_descent_violation_on_flipped_direction():
    g1, g2 = np.array([1.0, 0.2]), np.array([0.5, 1.0])
    assert mgda.descent_violations(np.stack([g1, g2], 1), -g1) == [0, 1]
    assert not mgda.is_common_descent([g1, g2], -g1)


def test_is_common_descent_matches_direct_check(rng):
    for _ in range(50):
        G = rng.standard_normal((5, 3))
        d = rng.standard_normal(5)
        direct = all(G[:, i] @ d >= -1e-12 * np.linalg.norm(G[:, i]) * np.linalg.norm(d)
                     for i in range(3))
        assert mgda.is_common_descent(G, d) == direct


def test_objective_monotone_across_iterations(rng):
    for _ in range(20):
        G = rng.standard_normal((6, 5))
        trace = []
        mgda.solve_simplex_qp(numkit.gram(G), trace=trace)
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-10, 10)),
       st.floats(0.1, 10))
def test_scale_equivariance(G, alpha):
    a, b = mgda.min_norm(G), mgda.min_norm(alpha * G)
    np.testing.assert_allclose(b.direction, alpha * a.direction,
                               atol=1e-7 * max(1, alpha * np.abs(G).max()))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-10, 10)))
def test_result_invariants(G):
    res = mgda.min_norm(G)
    assert res.weights.min() >= 0
    assert abs(res.weights.sum() - 1) <= 1e-9
    np.testing.assert_allclose(res.direction, G @ res.weights,
                               atol=1e-10 * max(1, np.abs(G).max()))
