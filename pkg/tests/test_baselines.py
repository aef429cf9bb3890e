import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkr.baselines import (
    DEFAULT_HYPERPARAMS,
    BaselineKind,
    BaselineModel,
    fit_baseline,
    fit_tree,
    predict_baseline,
    rbf_gram,
)

ALL = list(BaselineKind)


def _data(n=60, d=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, np.pi, (n, d))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] - 0.2 * X[:, 2] ** 2 + 0.05 * rng.normal(size=n)
    return X, y


def test_six_kinds():
    assert len(BaselineKind) == 6
    assert set(DEFAULT_HYPERPARAMS) == set(BaselineKind)


def test_ridge_recovers_exact_line():
    x = np.linspace(-1, 2, 15)[:, None]
    m = fit_baseline("RidgeLinear", x, 2 * x[:, 0] + 1, {"lam": 1e-12})
    A = np.hstack([x, np.ones_like(x)])
    coef, intercept = np.linalg.solve(A.T @ A, A.T @ (2 * x[:, 0] + 1))
    assert abs(m.state["coef"][0] - 2) < 1e-6 and abs(m.state["intercept"] - 1) < 1e-6
    assert abs(m.state["coef"][0] - coef) < 1e-6 and abs(m.state["intercept"] - intercept) < 1e-6


def test_knn_k1_reproduces_training_labels():
    X, y = _data()
    m = fit_baseline("KNearest", X, y, {"k": 1})
    assert np.array_equal(predict_baseline(m, X), y)


def test_knn_weighted_by_hand():
    X = np.array([[0.0], [1.0], [3.0]])
    y = np.array([0.0, 1.0, 3.0])
    m = fit_baseline("KNearest", X, y, {"k": 2, "weighted": True})
    # query 0.5: neighbours 0 and 1 at distance 0.5 each
    assert predict_baseline(m, [[0.5]])[0] == pytest.approx(0.5)
    # query 2.5: neighbours 3 (distance 0.5) and 1 (distance 1.5)
    assert predict_baseline(m, [[2.5]])[0] == pytest.approx((1 / 1.5 * 1 + 1 / 0.5 * 3) / (1 / 1.5 + 1 / 0.5))


def test_knn_k_too_large():
    X, y = _data(5)
    with pytest.raises(ValueError):
        fit_baseline("KNearest", X, y, {"k": 6})


@pytest.mark.parametrize("kind", ALL)
def test_constant_labels(kind):
    X, _ = _data(30)
    m = fit_baseline(kind, X, np.full(30, 1.25), seed=1)
    Xq = np.random.default_rng(9).uniform(0, np.pi, (10, 5))
    np.testing.assert_allclose(predict_baseline(m, Xq), 1.25, atol=1e-9)


def test_depth_zero_tree_predicts_mean():
    X, y = _data()
    m = fit_baseline("DecisionTree", X, y, {"max_depth": 0})
    np.testing.assert_allclose(predict_baseline(m, X), y.mean(), atol=1e-12)


def test_forest_of_one_equals_tree():
    X, y = _data()
    tree = fit_baseline("DecisionTree", X, y, seed=3)
    forest = fit_baseline("RandomForest", X, y, {"n_trees": 1, "bootstrap": False, "max_features": None}, seed=3)
    Xq = np.random.default_rng(4).uniform(0, np.pi, (20, 5))
    np.testing.assert_array_equal(predict_baseline(forest, Xq), predict_baseline(tree, Xq))


def test_forest_is_mean_of_trees():
    X, y = _data()
    m = fit_baseline("RandomForest", X, y, {"n_trees": 12}, seed=2)
    Xq = np.random.default_rng(5).uniform(0, np.pi, (15, 5))
    mean = np.mean([t.predict(Xq) for t in m.state["trees"]], axis=0)
    np.testing.assert_allclose(predict_baseline(m, Xq), mean, atol=1e-10)


def test_boosting_loss_non_increasing():
    X, y = _data()
    m = fit_baseline("GradientBoosting", X, y, seed=0)
    assert len(m.train_loss) == 201
    assert np.all(np.diff(m.train_loss) <= 1e-12)


def test_rbf_flat_kernel_limit_is_constant():
    X, y = _data(30)
    m = fit_baseline("RbfSVR", X, y - y.mean(), {"gamma": 1e-12})
    p = predict_baseline(m, np.random.default_rng(1).uniform(0, np.pi, (10, 5)))
    assert np.ptp(p) < 1e-6


def test_rbf_gram_is_psd():
    X, _ = _data(40)
    K = rbf_gram(X, X, 0.2)
    assert np.max(np.abs(K - K.T)) < 1e-12 and np.linalg.eigvalsh(K)[0] >= -1e-9
    np.testing.assert_allclose(np.diag(K), 1.0)


def test_tree_split_tie_break_prefers_lower_feature():
    # both features separate the labels identically
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    t = fit_tree(X, np.array([0.0, 0.0, 1.0, 1.0]), max_depth=1, min_leaf=1)
    assert t.feature[0] == 0


@pytest.mark.parametrize("kind", ALL)
def test_determinism_and_roundtrip(kind):
    X, y = _data(40)
    a = fit_baseline(kind, X, y, seed=7)
    b = fit_baseline(kind, X, y, seed=7)
    Xq = np.random.default_rng(2).uniform(0, np.pi, (8, 5))
    pa = predict_baseline(a, Xq)
    assert np.array_equal(pa, predict_baseline(b, Xq))
    assert np.all(np.isfinite(pa))
    c = BaselineModel.from_dict(a.to_dict())
    assert np.array_equal(pa, predict_baseline(c, Xq))


@pytest.mark.parametrize("kind", ALL)
def test_width_mismatch(kind):
    X, y = _data(20)
    m = fit_baseline(kind, X, y)
    with pytest.raises(ValueError):
        predict_baseline(m, np.zeros((2, 4)))


def test_rejects_bad_inputs():
    X, y = _data(10)
    with pytest.raises(ValueError):
        fit_baseline("RidgeLinear", X[:1], y[:1])
    with pytest.raises(ValueError):
        fit_baseline("RidgeLinear", X, np.where(np.arange(10) == 3, np.nan, y))
    with pytest.raises(ValueError):
        fit_baseline("RidgeLinear", X, y, {"alpha": 1.0})


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(ALL), st.integers(0, 2 ** 32 - 1))
def test_predictions_finite_inside_hull(kind, seed):
    X, y = _data(25, seed=seed % 1000)
    m = fit_baseline(kind, X, y, {"n_trees": 5} if kind is BaselineKind.FOREST else None, seed=seed)
    w = np.random.default_rng(seed).dirichlet(np.ones(25), size=6)
    assert np.all(np.isfinite(predict_baseline(m, w @ X)))
