"""Z and ZZ data-encoding circuits.

Each repetition applies H to every qubit, ``P(2 x_i)`` on qubit ``i``, then for
every entangled pair ``(i, j)`` the block ``CX(i->j) P(2 (pi - x_i)(pi - x_j))@j
CX(i->j)``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .statevector import CNOT, GateOp, H, P, QuantumState, apply_circuit, new_zero_state


class Family(str, enum.Enum):
    Z = "Z"
    ZZ = "ZZ"


class Entanglement(str, enum.Enum):
    NONE = "none"
    LINEAR = "linear"
    FULL = "full"


@dataclass(frozen=True)
class FeatureMapSpec:
    family: Family
    entanglement: Entanglement
    reps: int
    n_features: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "entanglement", Entanglement(self.entanglement))
        if self.family is Family.Z and self.entanglement is not Entanglement.NONE:
            raise ValueError("Z feature map cannot be entangled")
        if self.family is Family.ZZ and self.entanglement is Entanglement.NONE:
            raise ValueError("ZZ feature map needs linear or full entanglement")
        if int(self.reps) < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if int(self.n_features) < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")

    @property
    def name(self) -> str:
        if self.family is Family.Z:
            return f"Z-r{self.reps}"
        return f"ZZ-{self.entanglement.value}-r{self.reps}"

    def pairs(self) -> list[tuple[int, int]]:
        n = self.n_features
        if self.entanglement is Entanglement.LINEAR:
            return [(i, i + 1) for i in range(n - 1)]
        if self.entanglement is Entanglement.FULL:
            return list(itertools.combinations(range(n), 2))
        return []

    def gate_count(self) -> int:
        n = self.n_features
        return self.reps * (2 * n + 3 * len(self.pairs()))

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "entanglement": self.entanglement.value,
            "reps": int(self.reps),
            "n_features": int(self.n_features),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMapSpec":
        return cls(Family(d["family"]), Entanglement(d["entanglement"]), int(d["reps"]), int(d["n_features"]))


def benchmark_variants(n_features: int = 5) -> list[FeatureMapSpec]:
    """The four maps compared when tuning: Z/1, ZZ-linear/1, ZZ-full/1, ZZ-full/2."""
    return [
        FeatureMapSpec(Family.Z, Entanglement.NONE, 1, n_features),
        FeatureMapSpec(Family.ZZ, Entanglement.LINEAR, 1, n_features),
        FeatureMapSpec(Family.ZZ, Entanglement.FULL, 1, n_features),
        FeatureMapSpec(Family.ZZ, Entanglement.FULL, 2, n_features),
    ]


@dataclass(frozen=True)
class CircuitProgram:
    n_qubits: int
    gates: tuple[GateOp, ...]

    def __len__(self) -> int:
        return len(self.gates)

    def inverse(self) -> "CircuitProgram":
        return CircuitProgram(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def __add__(self, other: "CircuitProgram") -> "CircuitProgram":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits of different widths")
        return CircuitProgram(self.n_qubits, self.gates + other.gates)


def _check_input(spec: FeatureMapSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != spec.n_features:
        raise ValueError(f"expected a length-{spec.n_features} feature vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector contains non-finite values")
    return x


def build_circuit(spec: FeatureMapSpec, x) -> CircuitProgram:
    x = _check_input(spec, x)
    n = spec.n_features
    pairs = spec.pairs()
    layer: list[GateOp] = [H(i) for i in range(n)]
    layer += [P(i, 2.0 * x[i]) for i in range(n)]
    for i, j in pairs:
        phi = 2.0 * (math.pi - x[i]) * (math.pi - x[j])
        layer += [CNOT(i, j), P(j, phi), CNOT(i, j)]
    return CircuitProgram(n, tuple(layer) * spec.reps)


def encode(spec: FeatureMapSpec, x) -> QuantumState:
    program = build_circuit(spec, x)
    return apply_circuit(new_zero_state(program.n_qubits), program.gates)


def encode_many(spec: FeatureMapSpec, X) -> np.ndarray:
    """Amplitude matrix with one encoded state per row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((X.shape[0], 1 << spec.n_features), dtype=np.complex128)
    for r, row in enumerate(X):
        out[r] = encode(spec, row).amplitudes
    return out


def bloch_vector(state: QuantumState, qubit: int) -> np.ndarray:
    """Reduced single-qubit expectations ``(<X>, <Y>, <Z>)``."""
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    t = np.moveaxis(state._tensor(), n - 1 - qubit, 0).reshape(2, -1)
    a0, a1 = t[0], t[1]
    cross = np.vdot(a0, a1)
    return np.array([
        2.0 * cross.real,
        2.0 * cross.imag,
        float(np.vdot(a0, a0).real - np.vdot(a1, a1).real),
    ])


def bloch_angles(state: QuantumState, qubit: int) -> tuple[float, float]:
    """(polar, azimuth) of the qubit's reduced Bloch vector.

    A zero-length vector (maximally mixed marginal) reports ``(0.0, 0.0)``.
    """
    x, y, z = bloch_vector(state, qubit)
    r = math.sqrt(x * x + y * y + z * z)
    if r < 1e-15:
        return 0.0, 0.0
    polar = math.acos(max(-1.0, min(1.0, z / r)))
    azimuth = math.atan2(y, x) if math.hypot(x, y) > 1e-15 else 0.0
    return polar, azimuth
