"""Epsilon-insensitive SVR on a precomputed kernel, trained by SMO.

The dual is solved in the doubled form used by most SMO codes: variables
``a = (alpha, alpha*)`` with signs ``z = (+1, -1)``, minimising

    1/2 a^T Q a + p^T a,   Q_st = z_s z_t K_st,   p = (eps - y, eps + y)

subject to ``z^T a = 0`` and ``0 <= a <= C``.  The regression coefficients are
``beta = alpha - alpha*`` and predictions are ``K_cross @ beta + bias``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .qkernel import KernelMatrix

_TAU = 1e-12
SUPPORT_CUTOFF = 1e-9


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SVRModel:
    beta: np.ndarray
    bias: float
    C: float
    epsilon: float
    train_ids: list = field(default_factory=list)
    n_iter: int = 0
    objective_trace: Optional[np.ndarray] = None

    @property
    def support_ids(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.beta) > SUPPORT_CUTOFF)

    def to_dict(self) -> dict:
        return {
            "beta": [float(b) for b in self.beta],
            "bias": float(self.bias),
            "C": float(self.C),
            "epsilon": float(self.epsilon),
            "train_ids": list(self.train_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SVRModel":
        return cls(np.asarray(d["beta"], dtype=float), float(d["bias"]), float(d["C"]),
                   float(d["epsilon"]), list(d.get("train_ids", [])))


def _as_array(K) -> np.ndarray:
    return K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)


def dual_objective(beta, K, y, epsilon: float) -> float:
    """Dual objective to be maximised: -1/2 b^T K b - eps |b|_1 + y^T b."""
    beta = np.asarray(beta, dtype=float)
    K = _as_array(K)
    return float(-0.5 * beta @ K @ beta - epsilon * np.abs(beta).sum() + np.asarray(y) @ beta)


def _violating_pair(a, G, z, C):
    """Maximal violating pair (i, j) and the gap m - M; ties go to the lowest index."""
    score = -z * G
    up = ((z > 0) & (a < C)) | ((z < 0) & (a > 0))
    low = ((z < 0) & (a < C)) | ((z > 0) & (a > 0))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    s_up = np.where(up, score, -np.inf)
    s_low = np.where(low, score, np.inf)
    i = int(np.argmax(s_up))
    j = int(np.argmin(s_low))
    return i, j, float(s_up[i] - s_low[j])


def _doubled(K: np.ndarray, y: np.ndarray, beta: np.ndarray, epsilon: float):
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    a = np.concatenate([np.maximum(beta, 0.0), np.maximum(-beta, 0.0)])
    p = np.concatenate([epsilon - y, epsilon + y])
    Kb = K @ beta
    G = np.concatenate([Kb, -Kb]) + p
    return z, a, G


def _bias(a, G, z, C) -> float:
    zG = z * G
    at_upper = a >= C
    at_lower = a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        r = float(zG[free].mean())
    else:
        ub_mask = (at_upper & (z < 0)) | (at_lower & (z > 0))
        lb_mask = (at_upper & (z > 0)) | (at_lower & (z < 0))
        ub = zG[ub_mask].min() if ub_mask.any() else np.inf
        lb = zG[lb_mask].max() if lb_mask.any() else -np.inf
        r = float((ub + lb) / 2.0)
    return -r


def _share_duplicates(beta: np.ndarray, K: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Average coefficients over training points with identical kernel rows and labels.

    Only the group sum enters the predictor, so the optimum is a whole segment;
    picking its midpoint makes duplicates symmetric regardless of visit order.
    """
    n = len(beta)
    group = np.arange(n)
    for i in range(n):
        if group[i] != i:
            continue
        cand = np.flatnonzero((np.abs(K[i] - K[i, i]) <= 1e-12) & (y == y[i]))
        for j in cand[cand > i]:
            if group[j] == j and np.max(np.abs(K[j] - K[i])) <= 1e-12:
                group[j] = i
    if np.all(group == np.arange(n)):
        return beta
    out = beta.copy()
    for g in np.unique(group):
        members = group == g
        if members.sum() > 1:
            out[members] = beta[members].mean()
    return out


def fit(
    K,
    y,
    C: float = 1.0,
    epsilon: float = 0.1,
    tol: float = 1e-3,
    max_passes: Optional[int] = None,
    train_ids: Optional[Sequence] = None,
    psd_tol: float = 1e-8,
    track_objective: bool = False,
) -> SVRModel:
    """Train on kernel ``K`` and labels ``y``.

    ``max_passes`` caps the number of pair updates (default ``10 n^2``); running
    out raises :class:`ConvergenceError`.
    """
    K = _as_array(K)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    if not np.all(np.isfinite(y)):
        raise ValueError("labels contain non-finite values")
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel contains non-finite values")
    if C <= 0 or epsilon < 0:
        raise ValueError(f"need C > 0 and epsilon >= 0, got C={C}, epsilon={epsilon}")
    if np.max(np.abs(K - K.T)) > 1e-8:
        raise ValueError("kernel matrix is not symmetric")
    min_eig = float(np.linalg.eigvalsh(K)[0])
    if min_eig < -psd_tol:
        raise ValueError(f"kernel matrix not PSD (min eigenvalue {min_eig:.3g}); run psd_project first")
    if max_passes is None:
        max_passes = 10 * n * n

    z, a, G = _doubled(K, y, np.zeros(n), epsilon)
    diag = np.concatenate([np.diag(K), np.diag(K)])
    trace = [dual_objective(np.zeros(n), K, y, epsilon)] if track_objective else None

    it = 0
    while True:
        i, j, gap = _violating_pair(a, G, z, C)
        if gap <= tol:
            break
        if it >= max_passes:
            raise ConvergenceError(f"SMO did not reach tol={tol} within {max_passes} updates (gap {gap:.3g})")
        it += 1
        ri, rj = i % n, j % n
        Kij = K[ri, rj]
        ai_old, aj_old = a[i], a[j]
        if z[i] != z[j]:
            quad = diag[i] + diag[j] + 2.0 * (z[i] * z[j] * Kij)
            quad = quad if quad > 0 else _TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * (z[i] * z[j] * Kij)
            quad = quad if quad > 0 else _TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = total
        d_i = (a[i] - ai_old) * z[i]
        d_j = (a[j] - aj_old) * z[j]
        # Q_:,i = z * z_i * K[:, ri] tiled over both halves.
        col = K[:, ri] * d_i + K[:, rj] * d_j
        G += z * np.concatenate([col, col])
        if track_objective:
            trace.append(dual_objective(a[:n] - a[n:], K, y, epsilon))

    beta = _share_duplicates(a[:n] - a[n:], K, y)
    bias = _bias(a, G, z, C)
    return SVRModel(
        beta=beta,
        bias=bias,
        C=float(C),
        epsilon=float(epsilon),
        train_ids=list(train_ids) if train_ids is not None else list(range(n)),
        n_iter=it,
        objective_trace=np.asarray(trace) if track_objective else None,
    )


def predict(model: SVRModel, K_cross) -> np.ndarray:
    if isinstance(K_cross, KernelMatrix):
        if K_cross.col_ids and model.train_ids and list(K_cross.col_ids) != list(model.train_ids):
            raise ValueError("cross-kernel columns are not aligned with the model's training ids")
        values = K_cross.values
    else:
        values = np.atleast_2d(np.asarray(K_cross, dtype=float))
    if values.shape[1] != len(model.beta):
        raise ValueError(f"cross kernel has {values.shape[1]} columns, model has {len(model.beta)} training points")
    return values @ model.beta + model.bias


def kkt_report(model: SVRModel, K, y) -> float:
    """Largest pairwise KKT violation ``max(0, m - M)`` of the fitted dual point."""
    K = _as_array(K)
    y = np.asarray(y, dtype=float)
    z, a, G = _doubled(K, y, np.asarray(model.beta, dtype=float), model.epsilon)
    a = np.clip(a, 0.0, model.C)
    _, _, gap = _violating_pair(a, G, z, model.C)
    return max(0.0, gap)
