"""Six classical regressors behind one fit/predict interface.

Kinds: ridge, k-nearest neighbours, CART decision tree, random forest, least-squares
gradient boosting and an RBF-kernel SVR that reuses the SMO solver.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernel_svr


class BaselineKind(str, enum.Enum):
    RIDGE = "RidgeLinear"
    KNN = "KNearest"
    TREE = "DecisionTree"
    FOREST = "RandomForest"
    BOOSTING = "GradientBoosting"
    RBF_SVR = "RbfSVR"


DEFAULT_HYPERPARAMS = {
    BaselineKind.RIDGE: {"lam": 1.0},
    BaselineKind.KNN: {"k": 5, "weighted": True},
    BaselineKind.TREE: {"max_depth": 8, "min_leaf": 2},
    BaselineKind.FOREST: {"n_trees": 100, "max_depth": 8, "min_leaf": 2, "max_features": "sqrt", "bootstrap": True},
    BaselineKind.BOOSTING: {"n_rounds": 200, "max_depth": 3, "min_leaf": 2, "learning_rate": 0.05},
    BaselineKind.RBF_SVR: {"C": 1.0, "epsilon": 0.1, "gamma": None, "tol": 1e-3},
}


# --- regression tree -------------------------------------------------------

@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return self.value[node]
            r, nd = rows[active], node[active]
            go_left = X[r, f[active]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=int), np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=int), np.asarray(d["right"], dtype=int),
                   np.asarray(d["value"], dtype=float))


def _best_split(X, y, idx, features, min_leaf):
    """Lowest-SSE split; ties keep the earlier feature, then the lower threshold."""
    best = None
    n = len(idx)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        ys = y[idx][order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        # split after position p-1 -> left has p rows
        p = np.arange(min_leaf, n - min_leaf + 1)
        if len(p) == 0:
            continue
        valid = xs[p - 1] < xs[np.minimum(p, n - 1)]
        p = p[valid & (p < n)]
        if len(p) == 0:
            continue
        ls, lq = csum[p - 1], csq[p - 1]
        rs, rq = csum[-1] - ls, csq[-1] - lq
        sse = (lq - ls * ls / p) + (rq - rs * rs / (n - p))
        k = int(np.argmin(sse))
        if best is None or sse[k] < best[0] - 1e-12:
            thr = 0.5 * (xs[p[k] - 1] + xs[p[k]])
            best = (sse[k], int(f), float(thr))
    return best


def fit_tree(X, y, max_depth: int = 8, min_leaf: int = 2, max_features: Optional[int] = None, rng=None) -> Tree:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    min_leaf = max(1, int(min_leaf))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.mean(y[idx])))
        return len(value) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2 * min_leaf or np.ptp(y[idx]) == 0.0:
            continue
        if max_features is not None and max_features < d:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            features = range(d)
        best = _best_split(X, y, idx, features, min_leaf)
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        lnode, rnode = new_node(li), new_node(ri)
        feature[node], threshold[node], left[node], right[node] = f, thr, lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))
    return Tree(np.array(feature, dtype=int), np.array(threshold), np.array(left, dtype=int),
                np.array(right, dtype=int), np.array(value))


# --- model container -------------------------------------------------------

@dataclass
class BaselineModel:
    kind: BaselineKind
    hyperparams: dict
    state: dict = field(default_factory=dict)
    n_features: int = 0
    train_loss: list = field(default_factory=list)

    def to_dict(self) -> dict:
        state = {}
        for k, v in self.state.items():
            if isinstance(v, Tree):
                state[k] = v.to_dict()
            elif isinstance(v, list) and v and isinstance(v[0], Tree):
                state[k] = [t.to_dict() for t in v]
            elif isinstance(v, np.ndarray):
                state[k] = v.tolist()
            else:
                state[k] = v
        return {"kind": self.kind.value, "hyperparams": self.hyperparams, "n_features": self.n_features,
                "state": state}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineModel":
        kind = BaselineKind(d["kind"])
        s = dict(d["state"])
        if kind is BaselineKind.TREE:
            s["tree"] = Tree.from_dict(s["tree"])
        elif kind in (BaselineKind.FOREST, BaselineKind.BOOSTING):
            s["trees"] = [Tree.from_dict(t) for t in s["trees"]]
        for key in ("coef", "X", "y", "beta"):
            if key in s:
                s[key] = np.asarray(s[key], dtype=float)
        return cls(kind, d["hyperparams"], s, int(d["n_features"]))


def _resolve_max_features(spec, d: int) -> Optional[int]:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, min(d, int(spec)))


def rbf_gram(A, B, gamma: float) -> np.ndarray:
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def fit_baseline(kind, X, y, hyperparams: Optional[dict] = None, seed: int = 0) -> BaselineModel:
    kind = BaselineKind(kind)
    hp = dict(DEFAULT_HYPERPARAMS[kind])
    if hyperparams:
        unknown = set(hyperparams) - set(hp)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {kind.value}: {sorted(unknown)}")
        hp.update(hyperparams)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < 2 or len(y) != n:
        raise ValueError(f"need >= 2 rows with one label each, got X {X.shape} and {len(y)} labels")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    model = BaselineModel(kind, hp, n_features=d)
    s = model.state

    if kind is BaselineKind.RIDGE:
        xm, ym = X.mean(0), y.mean()
        Xc = X - xm
        coef = np.linalg.solve(Xc.T @ Xc + hp["lam"] * np.eye(d), Xc.T @ (y - ym))
        s["coef"] = coef
        s["intercept"] = float(ym - xm @ coef)
    elif kind is BaselineKind.KNN:
        if not 1 <= hp["k"] <= n:
            raise ValueError(f"k={hp['k']} must lie in [1, {n}]")
        s["X"], s["y"] = X.copy(), y.copy()
    elif kind is BaselineKind.TREE:
        s["tree"] = fit_tree(X, y, hp["max_depth"], hp["min_leaf"])
    elif kind is BaselineKind.FOREST:
        m = _resolve_max_features(hp["max_features"], d)
        trees = []
        for child in np.random.SeedSequence(seed).spawn(int(hp["n_trees"])):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, size=n) if hp["bootstrap"] else np.arange(n)
            trees.append(fit_tree(X[idx], y[idx], hp["max_depth"], hp["min_leaf"], m, rng))
        s["trees"] = trees
    elif kind is BaselineKind.BOOSTING:
        init = float(y.mean())
        pred = np.full(n, init)
        trees = []
        model.train_loss.append(float(np.mean((y - pred) ** 2)))
        for _ in range(int(hp["n_rounds"])):
            tree = fit_tree(X, y - pred, hp["max_depth"], hp["min_leaf"])
            pred = pred + hp["learning_rate"] * tree.predict(X)
            trees.append(tree)
            model.train_loss.append(float(np.mean((y - pred) ** 2)))
        s["init"], s["trees"] = init, trees
    else:
        gamma = hp["gamma"] if hp["gamma"] is not None else 1.0 / d
        K = rbf_gram(X, X, gamma)
        svr = kernel_svr.fit(K, y, C=hp["C"], epsilon=hp["epsilon"], tol=hp["tol"])
        s["X"], s["beta"], s["bias"], s["gamma"] = X.copy(), svr.beta, svr.bias, float(gamma)
    return model


def predict_baseline(model: BaselineModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected width {model.n_features}, got {X.shape[1]}")
    s, hp, kind = model.state, model.hyperparams, model.kind

    if kind is BaselineKind.RIDGE:
        return X @ s["coef"] + s["intercept"]
    if kind is BaselineKind.KNN:
        return _knn_predict(s["X"], s["y"], X, int(hp["k"]), bool(hp["weighted"]))
    if kind is BaselineKind.TREE:
        return s["tree"].predict(X)
    if kind is BaselineKind.FOREST:
        return np.mean([t.predict(X) for t in s["trees"]], axis=0)
    if kind is BaselineKind.BOOSTING:
        out = np.full(X.shape[0], s["init"])
        for t in s["trees"]:
            out = out + hp["learning_rate"] * t.predict(X)
        return out
    return rbf_gram(X, s["X"], s["gamma"]) @ s["beta"] + s["bias"]


def _knn_predict(Xtr, ytr, X, k, weighted):
    dist = np.linalg.norm(X[:, None, :] - Xtr[None, :, :], axis=2)
    # stable sort: equidistant neighbours resolve to the lower training index
    nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        dr, yr = dist[r, nn[r]], ytr[nn[r]]
        exact = dr <= 1e-12
        if exact.any():
            out[r] = yr[exact].mean()
        elif weighted:
            w = 1.0 / dr
            out[r] = (w @ yr) / w.sum()
        else:
            out[r] = yr.mean()
    return out
