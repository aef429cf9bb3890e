"""Fidelity quantum kernels: exact overlaps and shot-estimated (QKE) entries."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .feature_map import FeatureMapSpec, build_circuit, encode, encode_many
from .statevector import apply_circuit, new_zero_state, sample_measurement


@dataclass(frozen=True)
class KernelMode:
    """``shots=None`` means exact statevector fidelities."""

    shots: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")

    @property
    def exact(self) -> bool:
        return self.shots is None

    def __str__(self) -> str:
        return "exact" if self.exact else f"sampled({self.shots})"


EXACT = KernelMode()


@dataclass
class KernelMatrix:
    values: np.ndarray
    row_ids: list = field(default_factory=list)
    col_ids: list = field(default_factory=list)
    mode: KernelMode = EXACT

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n, m = self.values.shape
        if not self.row_ids:
            self.row_ids = list(range(n))
        if not self.col_ids:
            self.col_ids = list(range(m))
        if len(self.row_ids) != n or len(self.col_ids) != m:
            raise ValueError("id lists do not match matrix shape")

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["record_id", *self.col_ids])
            for rid, row in zip(self.row_ids, self.values):
                w.writerow([rid, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "KernelMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        col_ids = rows[0][1:]
        row_ids = [r[0] for r in rows[1:]]
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(values, row_ids, col_ids)


def kernel_entry_exact(spec: FeatureMapSpec, x, y) -> float:
    overlap = np.vdot(encode(spec, x).amplitudes, encode(spec, y).amplitudes)
    return float(min(1.0, abs(overlap) ** 2))


def kernel_entry_sampled(spec: FeatureMapSpec, x, y, shots: int, seed: int) -> float:
    """Fraction of all-zero outcomes of the circuit ``U(y)^dagger U(x)`` on ``|0...0>``."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    program = build_circuit(spec, x) + build_circuit(spec, y).inverse()
    state = apply_circuit(new_zero_state(program.n_qubits), program.gates)
    counts = sample_measurement(state, shots, seed)
    return counts.get(0, 0) / shots


def _check_rows(spec: FeatureMapSpec, X, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"{what} must be a non-empty 2-D matrix")
    if X.shape[1] != spec.n_features:
        raise ValueError(f"{what} has width {X.shape[1]}, feature map expects {spec.n_features}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{what} contains non-finite values")
    return X


def _entry_seed(seed: int, i: int, j: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, i, j])


def _sample_fidelities(fid: np.ndarray, mode: KernelMode, upper_only: bool) -> np.ndarray:
    # Binomial draws on the exact all-zero probability: same law as sampling the
    # compute-uncompute circuit, one independent stream per (i, j).
    out = np.empty_like(fid)
    n, m = fid.shape
    for i in range(n):
        for j in range(i if upper_only else 0, m):
            rng = np.random.default_rng(_entry_seed(mode.seed, i, j))
            p = min(1.0, max(0.0, fid[i, j]))
            out[i, j] = rng.binomial(mode.shots, p) / mode.shots
    return out


def gram_matrix(spec: FeatureMapSpec, X, mode: KernelMode = EXACT, ids: Optional[Sequence] = None) -> KernelMatrix:
    X = _check_rows(spec, X, "X")
    psi = encode_many(spec, X)
    fid = np.abs(psi.conj() @ psi.T) ** 2
    if not mode.exact:
        fid = _sample_fidelities(fid, mode, upper_only=True)
    upper = np.triu(fid, 1)
    K = upper + upper.T
    np.fill_diagonal(K, 1.0)
    np.clip(K, 0.0, 1.0, out=K)
    ids = list(ids) if ids is not None else []
    return KernelMatrix(K, ids, ids, mode)


def cross_matrix(
    spec: FeatureMapSpec,
    X_test,
    X_train,
    mode: KernelMode = EXACT,
    test_ids: Optional[Sequence] = None,
    train_ids: Optional[Sequence] = None,
) -> KernelMatrix:
    X_test = _check_rows(spec, X_test, "X_test")
    X_train = _check_rows(spec, X_train, "X_train")
    fid = np.abs(encode_many(spec, X_test).conj() @ encode_many(spec, X_train).T) ** 2
    if not mode.exact:
        fid = _sample_fidelities(fid, mode, upper_only=False)
    np.clip(fid, 0.0, 1.0, out=fid)
    return KernelMatrix(fid, list(test_ids or []), list(train_ids or []), mode)


def psd_project(K: KernelMatrix) -> KernelMatrix:
    """Nearest PSD matrix (Frobenius) by clipping negative eigenvalues to zero."""
    V = K.values
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError(f"psd_project needs a square matrix, got shape {V.shape}")
    sym = 0.5 * (V + V.T)
    w, U = np.linalg.eigh(sym)
    if w[0] >= 0.0:
        return KernelMatrix(sym, K.row_ids, K.col_ids, K.mode)
    w = np.clip(w, 0.0, None)
    out = (U * w) @ U.T
    out = 0.5 * (out + out.T)
    return KernelMatrix(out, K.row_ids, K.col_ids, K.mode)
