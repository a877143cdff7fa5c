"""Dense statevector simulation of a small qubit register.

Conventions used consistently across the package:

* Qubit 0 is the most significant bit of a basis index, so the basis state
  ``|b_0 b_1 ... b_{n-1}>`` has index ``sum(b_q << (n - 1 - q))``.
* Basis bit 0 corresponds to spin +1 and bit 1 to spin -1 (``Z|0> = +|0>``).
* Rotations use the half-angle convention ``R(theta) = exp(-i theta P / 2)``,
  so every supported gate is the identity at ``theta = 0``.
* ``CRY`` applies ``RY(theta)`` to the target when the control qubit is 1.

States are immutable from the caller's perspective: every operation returns
a fresh :class:`StateVector`, so concurrent use is safe as long as each
thread owns its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

MAX_QUBITS = 20  # dense 2**n storage cap

GATE_KINDS = ("RY", "RX", "CRY")
PAULI_AXES = ("X", "Y", "Z")

_PAULI_MATRICES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class StateVector:
    """Pure state of ``n_qubits`` qubits: 2**n complex amplitudes, unit norm."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized: |norm - 1| = {abs(norm - 1.0):.3e}")
        object.__setattr__(self, "amplitudes", amps)


@dataclass(frozen=True)
class Gate:
    """Concrete unitary: a rotation kind, its angle, and the qubits it acts on."""

    kind: str
    angle: float
    target: int
    control: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unsupported gate kind {self.kind!r}")
        if self.kind == "CRY":
            if self.control is None:
                raise ValueError("CRY requires a control qubit")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")


@dataclass(frozen=True)
class PauliTerm:
    """Real coefficient times a Pauli string, given as {qubit: axis} with axis in XYZ.

    The empty map is the identity.  Each qubit appears at most once by
    construction (dict keys).
    """

    coefficient: float
    factors: Mapping[int, str]

    def __post_init__(self) -> None:
        factors = dict(self.factors)
        for qubit, axis in factors.items():
            if qubit < 0:
                raise ValueError(f"negative qubit index {qubit}")
            if axis not in PAULI_AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "coefficient", float(self.coefficient))


@dataclass(frozen=True)
class PauliSum:
    """Hermitian operator as a list of real-coefficient Pauli strings."""

    terms: tuple[PauliTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))


def _check_qubit(index: int, n_qubits: int) -> None:
    if not 0 <= index < n_qubits:
        raise ValueError(f"qubit index {index} out of range for {n_qubits} qubits")


def _rotation_matrix(kind: str, angle: float) -> np.ndarray:
    half = 0.5 * angle
    c, s = math.cos(half), math.sin(half)
    if kind in ("RY", "CRY"):
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    raise ValueError(f"unsupported gate kind {kind!r}")


def _apply_matrix(amps: np.ndarray, n: int, matrix: np.ndarray, target: int) -> np.ndarray:
    psi = amps.reshape((2,) * n)
    psi = np.tensordot(matrix, psi, axes=([1], [target]))
    return np.moveaxis(psi, 0, target).reshape(-1)


def _apply_controlled_matrix(
    amps: np.ndarray, n: int, matrix: np.ndarray, control: int, target: int
) -> np.ndarray:
    psi = amps.reshape((2,) * n).copy()
    sel = [slice(None)] * n
    sel[control] = 1
    sub = psi[tuple(sel)]  # view of the control=1 block, shape (2,)*(n-1)
    sub_target = target - 1 if target > control else target
    rotated = np.tensordot(matrix, sub, axes=([1], [sub_target]))
    psi[tuple(sel)] = np.moveaxis(rotated, 0, sub_target)
    return psi.reshape(-1)


def _apply_gate_raw(
    amps: np.ndarray, n: int, kind: str, angle: float, target: int, control: int | None
) -> np.ndarray:
    matrix = _rotation_matrix(kind, angle)
    if kind == "CRY":
        return _apply_controlled_matrix(amps, n, matrix, control, target)
    return _apply_matrix(amps, n, matrix, target)


def _apply_pauli_raw(amps: np.ndarray, n: int, factors: Mapping[int, str]) -> np.ndarray:
    out = amps
    for qubit, axis in factors.items():
        out = _apply_matrix(out, n, _PAULI_MATRICES[axis], qubit)
    if out is amps:
        out = amps.copy()
    return out


def init_plus(n_qubits: int) -> StateVector:
    """Uniform-superposition register: every amplitude equals 2**(-n/2)."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amp = 2.0 ** (-0.5 * n_qubits)
    return StateVector(n_qubits, np.full(2**n_qubits, amp, dtype=np.complex128))


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply a single concrete gate; the output stays normalized."""
    _check_qubit(gate.target, state.n_qubits)
    if gate.control is not None:
        _check_qubit(gate.control, state.n_qubits)
    amps = _apply_gate_raw(
        state.amplitudes, state.n_qubits, gate.kind, gate.angle, gate.target, gate.control
    )
    return StateVector(state.n_qubits, amps)


def apply_pauli(state: StateVector, term: PauliTerm) -> StateVector:
    """Apply a Pauli string as a unitary.  The term's coefficient is ignored."""
    for qubit in term.factors:
        _check_qubit(qubit, state.n_qubits)
    amps = _apply_pauli_raw(state.amplitudes, state.n_qubits, term.factors)
    return StateVector(state.n_qubits, amps)


def expectation(state: StateVector, op: PauliSum) -> float:
    """<state|op|state> for a Hermitian Pauli sum.

    The result is mathematically real; the floating-point imaginary residue
    is checked against 1e-10 and discarded.
    """
    amps = state.amplitudes
    value = 0.0 + 0.0j
    for term in op.terms:
        for qubit in term.factors:
            _check_qubit(qubit, state.n_qubits)
        value += term.coefficient * np.vdot(
            amps, _apply_pauli_raw(amps, state.n_qubits, term.factors)
        )
    if abs(value.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> (conjugate-linear in the first argument)."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|**2, clipped into [0, 1] against rounding overshoot."""
    overlap = inner_product(a, b)
    return min(max(abs(overlap) ** 2, 0.0), 1.0)


def basis_distribution(state: StateVector) -> np.ndarray:
    """Computational-basis measurement probabilities, indexed like the amplitudes.

    Index z corresponds to the spin configuration with sigma_q = +1 where bit
    q of z is 0 and sigma_q = -1 where it is 1.
    """
    return np.abs(state.amplitudes) ** 2
