import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import svr_dual_oracle
from qkr.feature_map import FeatureMapSpec
from qkr.kernel_svr import ConvergenceError, SVRModel, dual_objective, fit, kkt_report, predict
from qkr.qkernel import KernelMatrix, cross_matrix, gram_matrix


def _random_problem(rng, n):
    X = rng.uniform(0, math.pi, (n, 3))
    K = gram_matrix(FeatureMapSpec("ZZ", "full", 1, 3), 0.3 * X).values
    y = rng.normal(size=n)
    return K, y


def test_constant_labels_give_constant_model():
    K, _ = _random_problem(np.random.default_rng(0), 6)
    m = fit(K, np.full(6, 2.5), C=1.0, epsilon=0.1)
    assert np.all(m.beta == 0)
    assert m.bias == 2.5
    np.testing.assert_allclose(predict(m, K), 2.5)


def test_identity_kernel_matches_closed_form():
    y = np.array([1.0, -1.0, 1.0, -1.0])
    m = fit(np.eye(4), y, C=10.0, epsilon=0.0, tol=1e-8)
    # optimum beta = y - mean(y) = y, objective -2 + 4
    assert abs(dual_objective(m.beta, np.eye(4), y, 0.0) - 2.0) < 1e-4
    opt, _ = svr_dual_oracle(np.eye(4), y, 10.0, 0.0)
    assert abs(dual_objective(m.beta, np.eye(4), y, 0.0) - opt) < 1e-4


def test_duplicate_rows_get_equal_coefficients():
    X = np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [1.0, 0.4, 0.2], [0.5, 0.9, 0.7]])
    K = gram_matrix(FeatureMapSpec("ZZ", "full", 1, 3), X).values
    y = np.array([1.0, 1.0, -0.5, 0.2])
    m = fit(K, y, C=5.0, epsilon=0.05, tol=1e-8)
    assert abs(m.beta[0] - m.beta[1]) < 1e-6


def test_predict_linear_form():
    m = SVRModel(np.array([1.0]), 0.0, 1.0, 0.1, ["a"])
    assert predict(m, np.array([[0.5]]))[0] == 0.5


def test_predict_constant_model():
    m = SVRModel(np.zeros(3), 1.7, 1.0, 0.1)
    assert np.all(predict(m, np.random.default_rng(0).uniform(size=(4, 3))) == 1.7)


def test_predict_checks_alignment():
    m = SVRModel(np.zeros(2), 0.0, 1.0, 0.1, ["a", "b"])
    with pytest.raises(ValueError):
        predict(m, KernelMatrix(np.zeros((1, 2)), ["t"], ["b", "a"]))
    with pytest.raises(ValueError):
        predict(m, np.zeros((1, 3)))


def test_interpolates_with_zero_epsilon_and_large_C():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (6, 3))
    K = gram_matrix(FeatureMapSpec("ZZ", "full", 1, 3), X).values
    y = rng.normal(size=6)
    m = fit(K, y, C=1e4, epsilon=0.0, tol=1e-7)
    assert np.max(np.abs(predict(m, K) - y)) < 1e-5


def test_kkt_hand_computed_two_points():
    y = np.array([1.0, -1.0])
    zero = SVRModel(np.zeros(2), 0.0, 1.0, 0.1)
    # max_i (y_i - eps) - min_i (y_i + eps) at beta = 0
    assert abs(kkt_report(zero, np.eye(2), y) - 1.8) < 1e-12


def test_kkt_positive_when_unfitted():
    y = np.array([0.0, 3.0, -2.0])
    assert kkt_report(SVRModel(np.zeros(3), 0.0, 1.0, 0.1), np.eye(3), y) > 0


def test_converged_model_meets_tolerance():
    K, y = _random_problem(np.random.default_rng(5), 8)
    m = fit(K, y, C=2.0, epsilon=0.1, tol=1e-4)
    assert kkt_report(m, K, y) <= 1e-4


def test_pass_cap_raises():
    K, y = _random_problem(np.random.default_rng(6), 8)
    with pytest.raises(ConvergenceError):
        fit(K, y, C=10.0, epsilon=0.0, tol=1e-9, max_passes=1)


@pytest.mark.parametrize(
    "K,y,kw",
    [
        (np.eye(2), [1.0], {}),
        (np.array([[1.0, 0.5], [0.4, 1.0]]), [1.0, 0.0], {}),
        (np.array([[1.0, 2.0], [2.0, 1.0]]), [1.0, 0.0], {}),
        (np.eye(2), [1.0, math.nan], {}),
        (np.eye(2), [1.0, 0.0], {"C": 0.0}),
        (np.eye(2), [1.0, 0.0], {"epsilon": -1.0}),
        (np.zeros((0, 0)), [], {}),
    ],
)
def test_fit_rejects_bad_input(K, y, kw):
    with pytest.raises(ValueError):
        fit(K, np.asarray(y, dtype=float), **kw)


def test_model_dict_roundtrip():
    K, y = _random_problem(np.random.default_rng(1), 5)
    m = fit(K, y, train_ids=list("abcde"))
    back = SVRModel.from_dict(m.to_dict())
    assert np.array_equal(back.beta, m.beta) and back.bias == m.bias and back.train_ids == list("abcde")


def test_support_ids():
    m = SVRModel(np.array([0.0, 0.3, -1e-12, -0.2]), 0.0, 1.0, 0.1)
    assert list(m.support_ids) == [1, 3]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), st.floats(0.1, 20), st.floats(0, 0.5))
def test_dual_feasible_and_objective_monotone(n, seed, C, eps):
    K, y = _random_problem(np.random.default_rng(seed), n)
    m = fit(K, y, C=C, epsilon=eps, tol=1e-3, track_objective=True)
    assert abs(m.beta.sum()) <= 1e-8
    assert np.all(np.abs(m.beta) <= C + 1e-9)
    assert np.all(np.diff(m.objective_trace) >= -1e-10)
    assert kkt_report(m, K, y) <= 1e-3


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
def test_predictions_stay_near_label_hull(n, seed):
    rng = np.random.default_rng(seed)
    K, y = _random_problem(rng, n)
    C, eps = 1.0, 0.1
    m = fit(K, y, C=C, epsilon=eps)
    Xq = rng.uniform(0, math.pi, (5, 3)) * 0.3
    Xt = rng.uniform(0, math.pi, (n, 3)) * 0.3
    Kx = cross_matrix(FeatureMapSpec("ZZ", "full", 1, 3), Xq, Xt).values
    margin = C * n * 1.0
    p = predict(m, Kx)
    assert np.all(p >= y.min() - eps - margin) and np.all(p <= y.max() + eps + margin)


def test_matches_qp_oracle_on_small_problems():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        K, y = _random_problem(rng, n)
        C, eps = float(rng.uniform(0.2, 10)), float(rng.uniform(0, 0.3))
        m = fit(K, y, C=C, epsilon=eps, tol=1e-3)
        opt, _ = svr_dual_oracle(K, y, C, eps)
        assert abs(dual_objective(m.beta, K, y, eps) - opt) < 1e-4
