"""Dense statevector simulation for small qubit registers.

Basis index bit ``k`` holds qubit ``k``; qubit 0 is the least significant bit,
so ``|01>`` written as a bit string ``q1 q0`` is basis index 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

MAX_QUBITS = 24

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class GateKind(str, enum.Enum):
    HADAMARD = "H"
    PHASE = "P"
    CNOT = "CX"


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    control: Optional[int] = None
    angle: float = 0.0

    def __str__(self) -> str:
        if self.kind is GateKind.CNOT:
            return f"CX({self.control}->{self.target})"
        if self.kind is GateKind.PHASE:
            return f"P({self.angle:.6g})@{self.target}"
        return f"H@{self.target}"

    def inverse(self) -> "GateOp":
        if self.kind is GateKind.PHASE:
            return GateOp(GateKind.PHASE, self.target, angle=-self.angle)
        return self


def H(target: int) -> GateOp:
    return GateOp(GateKind.HADAMARD, target)


def P(target: int, angle: float) -> GateOp:
    return GateOp(GateKind.PHASE, target, angle=float(angle))


def CNOT(control: int, target: int) -> GateOp:
    return GateOp(GateKind.CNOT, target, control=control)


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def _tensor(self) -> np.ndarray:
        # C-order reshape: axis 0 is the most significant qubit.
        return self.amplitudes.reshape((2,) * self.n_qubits)


def new_zero_state(n_qubits: int) -> QuantumState:
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(1 << int(n_qubits), dtype=np.complex128)
    amps[0] = 1.0
    return QuantumState(int(n_qubits), amps)


def basis_state(n_qubits: int, index: int) -> QuantumState:
    state = new_zero_state(n_qubits)
    if not 0 <= index < (1 << n_qubits):
        raise ValueError(f"basis index {index} out of range for {n_qubits} qubits")
    state.amplitudes[0] = 0.0
    state.amplitudes[index] = 1.0
    return state


def _axis(n_qubits: int, qubit: int) -> int:
    return n_qubits - 1 - qubit


def _check_gate(state: QuantumState, gate: GateOp) -> None:
    n = state.n_qubits
    if not 0 <= gate.target < n:
        raise ValueError(f"target qubit {gate.target} out of range for {n} qubits")
    if gate.kind is GateKind.CNOT:
        if gate.control is None or not 0 <= gate.control < n:
            raise ValueError(f"control qubit {gate.control} out of range for {n} qubits")
        if gate.control == gate.target:
            raise ValueError("control and target must differ")
    elif gate.control is not None:
        raise ValueError(f"{gate.kind.name} takes no control qubit")


def apply_gate(state: QuantumState, gate: GateOp) -> QuantumState:
    """Apply ``gate`` to ``state`` in place and return the same state object."""
    _check_gate(state, gate)
    n = state.n_qubits
    t = state._tensor()
    lo = [slice(None)] * n
    hi = [slice(None)] * n
    ax = _axis(n, gate.target)
    lo[ax], hi[ax] = 0, 1
    lo, hi = tuple(lo), tuple(hi)

    if gate.kind is GateKind.HADAMARD:
        a0 = t[lo].copy()
        a1 = t[hi]
        t[lo] = (a0 + a1) * _INV_SQRT2
        t[hi] = (a0 - a1) * _INV_SQRT2
    elif gate.kind is GateKind.PHASE:
        t[hi] *= np.exp(1j * gate.angle)
    else:
        cax = _axis(n, gate.control)
        idx0 = [slice(None)] * n
        idx1 = [slice(None)] * n
        idx0[cax] = idx1[cax] = 1
        idx0[ax], idx1[ax] = 0, 1
        idx0, idx1 = tuple(idx0), tuple(idx1)
        tmp = t[idx0].copy()
        t[idx0] = t[idx1]
        t[idx1] = tmp
    return state


def apply_circuit(state: QuantumState, gates) -> QuantumState:
    for gate in gates:
        apply_gate(state, gate)
    return state


def inner_product(a: QuantumState, b: QuantumState) -> complex:
    """Return ``<a|b>`` (conjugate-linear in ``a``)."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def probability_all_zero(state: QuantumState) -> float:
    return float(abs(state.amplitudes[0]) ** 2)


def sample_measurement(state: QuantumState, shots: int, seed: int) -> dict[int, int]:
    """Measure every qubit ``shots`` times; returns ``{basis_index: count}``.

    Only outcomes with a nonzero count appear in the map.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(int(shots), probs)
    return {int(k): int(c) for k, c in enumerate(counts) if c}
