"""Parametrized circuit for the variational imaginary-time evolution.

The ansatz acts on the uniform superposition |++...+> and carries one angle
per gate: a single-qubit RY and RX on every qubit, a CRY for every ordered
pair (i -> j) with i < j, and one wrap-around CRY from the last qubit back to
the first.  At theta = 0 the whole circuit is the identity.

Each gate kind also exposes its derivative as a sum of (complex coefficient,
Pauli insertion) pairs: dU/dtheta = sum_i a_i * U * u_i with u_i a Pauli
string applied immediately before U in circuit order.  That expansion is what
turns state derivatives into circuit evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevector import (
    Gate,
    PauliTerm,
    StateVector,
    _apply_gate_raw,
    _apply_pauli_raw,
    init_plus,
)

__all__ = [
    "ParamGate",
    "DerivativeTerm",
    "ParamCircuit",
    "build_ansatz",
    "prepare_state",
    "derivative_expansion",
    "derivative_state",
    "state_jacobian",
    "circuit_to_dict",
    "circuit_from_dict",
]


@dataclass(frozen=True)
class ParamGate:
    """One parametrized gate: kind, wiring, and its slot in the angle vector."""

    kind: str
    target: int
    control: int | None
    param_index: int


@dataclass(frozen=True)
class DerivativeTerm:
    """One term of a gate-derivative expansion.

    ``insertion`` is a unit-coefficient Pauli string applied right before the
    gate's own unitary; ``coefficient`` weights that branch.
    """

    coefficient: complex
    insertion: PauliTerm


@dataclass(frozen=True)
class ParamCircuit:
    """Ordered parametrized gates on ``n_qubits`` qubits, one angle per gate."""

    n_qubits: int
    gates: tuple[ParamGate, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        for position, gate in enumerate(self.gates):
            if gate.param_index != position:
                raise ValueError("param_index values must be 0..P-1 in gate order")
            if not 0 <= gate.target < self.n_qubits:
                raise ValueError(f"target {gate.target} out of range")
            if gate.kind == "CRY":
                if gate.control is None or gate.control == gate.target:
                    raise ValueError("CRY needs a distinct control qubit")
                if not 0 <= gate.control < self.n_qubits:
                    raise ValueError(f"control {gate.control} out of range")
            elif gate.kind in ("RY", "RX"):
                if gate.control is not None:
                    raise ValueError(f"{gate.kind} takes no control")
            else:
                raise ValueError(f"unsupported gate kind {gate.kind!r}")

    @property
    def n_params(self) -> int:
        return len(self.gates)


def build_ansatz(n_qubits: int) -> ParamCircuit:
    """RY+RX layer on every qubit, all-pairs CRY, then a wrap-around CRY.

    Parameter count is 2n + n(n-1)/2 + 1.
    """
    if n_qubits < 2:
        raise ValueError("the ansatz needs at least 2 qubits")
    gates: list[ParamGate] = []
    for q in range(n_qubits):
        gates.append(ParamGate("RY", q, None, len(gates)))
    for q in range(n_qubits):
        gates.append(ParamGate("RX", q, None, len(gates)))
    for i in range(n_qubits):
        for j in range(i + 1, n_qubits):
            gates.append(ParamGate("CRY", j, i, len(gates)))
    gates.append(ParamGate("CRY", 0, n_qubits - 1, len(gates)))
    return ParamCircuit(n_qubits, tuple(gates))


def bind_gates(circuit: ParamCircuit, theta: np.ndarray) -> list[Gate]:
    """Concrete gates for one angle vector, in circuit order."""
    theta = _check_theta(circuit, theta)
    return [
        Gate(g.kind, float(theta[g.param_index]), g.target, g.control)
        for g in circuit.gates
    ]


def _check_theta(circuit: ParamCircuit, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_params,):
        raise ValueError(
            f"expected {circuit.n_params} angles, got shape {theta.shape}"
        )
    return theta


def prepare_state(circuit: ParamCircuit, theta: np.ndarray) -> StateVector:
    """U(theta) applied to |++...+>, gates in circuit order."""
    theta = _check_theta(circuit, theta)
    amps = init_plus(circuit.n_qubits).amplitudes
    for g in circuit.gates:
        amps = _apply_gate_raw(
            amps, circuit.n_qubits, g.kind, theta[g.param_index], g.target, g.control
        )
    return StateVector(circuit.n_qubits, amps)


def derivative_expansion(gate: ParamGate) -> tuple[DerivativeTerm, ...]:
    """Pauli-insertion expansion of dU/dtheta for one gate.

    Half-angle rotations give a single -i/2 term; CRY splits its projector
    |1><1| = (I - Z)/2 into two insertions of weight 1/4.
    """
    if gate.kind == "RY":
        return (DerivativeTerm(-0.5j, PauliTerm(1.0, {gate.target: "Y"})),)
    if gate.kind == "RX":
        return (DerivativeTerm(-0.5j, PauliTerm(1.0, {gate.target: "X"})),)
    if gate.kind == "CRY":
        return (
            DerivativeTerm(-0.25j, PauliTerm(1.0, {gate.target: "Y"})),
            DerivativeTerm(0.25j, PauliTerm(1.0, {gate.control: "Z", gate.target: "Y"})),
        )
    raise ValueError(f"unsupported gate kind {gate.kind!r}")


def derivative_state(
    circuit: ParamCircuit, theta: np.ndarray, k: int
) -> list[tuple[complex, StateVector]]:
    """Expansion states for d|phi(theta)>/d theta_k.

    Each entry is (a_i, |v_i>) where |v_i> applies the gates before k, the
    i-th Pauli insertion, then gate k and everything after it.  The weighted
    sum of the entries is the state derivative.
    """
    theta = _check_theta(circuit, theta)
    if not 0 <= k < circuit.n_params:
        raise ValueError(f"parameter index {k} out of range")
    n = circuit.n_qubits
    amps = init_plus(n).amplitudes
    for g in circuit.gates[:k]:
        amps = _apply_gate_raw(amps, n, g.kind, theta[g.param_index], g.target, g.control)
    entries = []
    for term in derivative_expansion(circuit.gates[k]):
        branch = _apply_pauli_raw(amps, n, term.insertion.factors)
        for g in circuit.gates[k:]:
            branch = _apply_gate_raw(
                branch, n, g.kind, theta[g.param_index], g.target, g.control
            )
        entries.append((term.coefficient, StateVector(n, branch)))
    return entries


def state_jacobian(circuit: ParamCircuit, theta: np.ndarray) -> np.ndarray:
    """All state derivatives d|phi>/d theta_k as a (P, 2**n) array.

    Row k is the weighted sum of that parameter's expansion states; prefix
    states are shared across parameters, so this is the cheap way to build
    every derivative at once.
    """
    theta = _check_theta(circuit, theta)
    n = circuit.n_qubits
    rows = np.empty((circuit.n_params, 2**n), dtype=np.complex128)
    prefix = init_plus(n).amplitudes
    for k, gate in enumerate(circuit.gates):
        total = np.zeros(2**n, dtype=np.complex128)
        for term in derivative_expansion(gate):
            branch = _apply_pauli_raw(prefix, n, term.insertion.factors)
            for g in circuit.gates[k:]:
                branch = _apply_gate_raw(
                    branch, n, g.kind, theta[g.param_index], g.target, g.control
                )
            total += term.coefficient * branch
        rows[k] = total
        prefix = _apply_gate_raw(
            prefix, n, gate.kind, theta[gate.param_index], gate.target, gate.control
        )
    return rows


def circuit_to_dict(circuit: ParamCircuit) -> dict:
    """JSON-ready circuit description for experiment provenance."""
    return {
        "n_qubits": circuit.n_qubits,
        "gates": [
            {
                "kind": g.kind,
                "target": g.target,
                "control": g.control,
                "param_index": g.param_index,
            }
            for g in circuit.gates
        ],
    }


def circuit_from_dict(data: dict) -> ParamCircuit:
    gates = tuple(
        ParamGate(g["kind"], g["target"], g.get("control"), g["param_index"])
        for g in data["gates"]
    )
    return ParamCircuit(int(data["n_qubits"]), gates)
