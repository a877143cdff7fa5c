"""Classical Ising energies, Gibbs distributions, and exact thermal oracles.

Everything here runs by exhaustive enumeration over the 2**N spin
configurations, which is the point: these are the brute-force references the
quantum pipeline is checked against.  Temperature is fixed at k_B*T = 1.

Sign convention: H(sigma) = -sum_{i<j} J_ij sigma_i sigma_j - sum_i h_i sigma_i,
so positive couplings favor aligned spins and lower energy means higher
probability.  All operations are pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .statevector import MAX_QUBITS, PauliSum, PauliTerm, StateVector

__all__ = [
    "IsingParams",
    "spin_pairs",
    "all_spin_configs",
    "config_index",
    "classical_energy",
    "partition_function",
    "boltzmann_distribution",
    "kld",
    "quantum_hamiltonian",
    "gradient_observables",
    "imaginary_time_state",
    "gibbs_target_state",
    "exact_thermal_gradient",
]


def spin_pairs(n_units: int) -> list[tuple[int, int]]:
    """Unordered unit pairs (i, j) with i < j, in lexicographic order."""
    return [(i, j) for i in range(n_units) for j in range(i + 1, n_units)]


@dataclass(frozen=True)
class IsingParams:
    """Couplings and local fields of a fully connected Ising model.

    ``couplings`` holds one value per pair in :func:`spin_pairs` order;
    ``fields`` one value per unit.  The flattened learning vector is
    ``(couplings..., fields...)``.
    """

    n_units: int
    couplings: np.ndarray
    fields: np.ndarray

    def __post_init__(self) -> None:
        if self.n_units < 1:
            raise ValueError("n_units must be positive")
        n_pairs = self.n_units * (self.n_units - 1) // 2
        couplings = np.asarray(self.couplings, dtype=float)
        fields = np.asarray(self.fields, dtype=float)
        if couplings.shape != (n_pairs,):
            raise ValueError(f"expected {n_pairs} couplings, got shape {couplings.shape}")
        if fields.shape != (self.n_units,):
            raise ValueError(f"expected {self.n_units} fields, got shape {fields.shape}")
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "fields", fields)

    @property
    def dim(self) -> int:
        """Length of the flattened parameter vector."""
        return self.couplings.size + self.fields.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.couplings, self.fields])

    @classmethod
    def from_vector(cls, n_units: int, vector: np.ndarray) -> "IsingParams":
        vector = np.asarray(vector, dtype=float)
        n_pairs = n_units * (n_units - 1) // 2
        if vector.shape != (n_pairs + n_units,):
            raise ValueError(f"expected vector of length {n_pairs + n_units}")
        return cls(n_units, vector[:n_pairs], vector[n_pairs:])

    @classmethod
    def zeros(cls, n_units: int) -> "IsingParams":
        return cls.from_vector(n_units, np.zeros(n_units * (n_units - 1) // 2 + n_units))

    def to_dict(self) -> dict:
        """JSON-ready form: {"n": N, "J": [[i, j, value], ...], "h": [...]}."""
        pairs = spin_pairs(self.n_units)
        return {
            "n": self.n_units,
            "J": [[i, j, float(v)] for (i, j), v in zip(pairs, self.couplings)],
            "h": [float(v) for v in self.fields],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IsingParams":
        n = int(data["n"])
        pairs = spin_pairs(n)
        index = {pair: p for p, pair in enumerate(pairs)}
        couplings = np.zeros(len(pairs))
        for i, j, value in data["J"]:
            key = (int(i), int(j)) if i < j else (int(j), int(i))
            if key not in index:
                raise ValueError(f"invalid coupling pair ({i}, {j}) for n={n}")
            couplings[index[key]] = float(value)
        return cls(n, couplings, np.asarray(data["h"], dtype=float))


def all_spin_configs(n_units: int) -> np.ndarray:
    """All 2**N configurations, row z holding the spins for basis index z."""
    if not 1 <= n_units <= MAX_QUBITS:
        raise ValueError(f"n_units must be in [1, {MAX_QUBITS}], got {n_units}")
    indices = np.arange(2**n_units)
    bits = (indices[:, None] >> (n_units - 1 - np.arange(n_units))) & 1
    return (1 - 2 * bits).astype(np.int8)


def config_index(spins: np.ndarray) -> int:
    """Basis index of one spin configuration (inverse of all_spin_configs rows)."""
    spins = np.asarray(spins)
    bits = (1 - spins) // 2
    n = spins.size
    return int(np.sum(bits << (n - 1 - np.arange(n))))


def _validate_config(spins: np.ndarray, n_units: int) -> np.ndarray:
    spins = np.asarray(spins)
    if spins.shape != (n_units,):
        raise ValueError(f"expected {n_units} spins, got shape {spins.shape}")
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spins must be +1 or -1")
    return spins.astype(float)


def classical_energy(config: np.ndarray, params: IsingParams) -> float:
    """Ising energy of one configuration."""
    s = _validate_config(config, params.n_units)
    energy = -float(params.fields @ s)
    for p, (i, j) in enumerate(spin_pairs(params.n_units)):
        energy -= params.couplings[p] * s[i] * s[j]
    return energy


def _all_energies(params: IsingParams) -> np.ndarray:
    spins = all_spin_configs(params.n_units).astype(float)
    energies = -(spins @ params.fields)
    for p, (i, j) in enumerate(spin_pairs(params.n_units)):
        energies -= params.couplings[p] * spins[:, i] * spins[:, j]
    return energies


def partition_function(params: IsingParams) -> float:
    """log Z via max-shifted log-sum-exp over all configurations."""
    neg_energies = -_all_energies(params)
    shift = float(np.max(neg_energies))
    return shift + math.log(float(np.sum(np.exp(neg_energies - shift))))


def boltzmann_distribution(params: IsingParams) -> np.ndarray:
    """Gibbs probabilities exp(-H)/Z over the basis ordering of all_spin_configs."""
    log_z = partition_function(params)
    probs = np.exp(-_all_energies(params) - log_z)
    return probs / probs.sum()


def kld(p_data: np.ndarray, p_model: np.ndarray) -> float:
    """Kullback-Leibler divergence sum p_data * log(p_data / p_model).

    Entries where p_data is zero contribute nothing.  If p_model vanishes on
    the support of p_data the divergence is reported as math.inf.
    """
    p = np.asarray(p_data, dtype=float)
    q = np.asarray(p_model, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def quantum_hamiltonian(params: IsingParams) -> PauliSum:
    """Ising energy promoted to a Pauli-Z operator, diagonal in the basis.

    Its eigenvalue on the basis state of a configuration equals
    :func:`classical_energy` for that configuration.  Zero-coefficient terms
    are dropped.
    """
    terms = []
    for p, (i, j) in enumerate(spin_pairs(params.n_units)):
        if params.couplings[p] != 0.0:
            terms.append(PauliTerm(-params.couplings[p], {i: "Z", j: "Z"}))
    for i, h in enumerate(params.fields):
        if h != 0.0:
            terms.append(PauliTerm(-h, {i: "Z"}))
    return PauliSum(tuple(terms))


def gradient_observables(params: IsingParams) -> list[PauliSum]:
    """Observables for dH/du, one per flattened parameter component.

    Each coupling component contributes (-1) Z_i Z_j and each field component
    (-1) Z_i, ordered exactly like the flattened parameter vector.
    """
    observables = [
        PauliSum((PauliTerm(-1.0, {i: "Z", j: "Z"}),))
        for i, j in spin_pairs(params.n_units)
    ]
    observables.extend(
        PauliSum((PauliTerm(-1.0, {i: "Z"}),)) for i in range(params.n_units)
    )
    return observables


def imaginary_time_state(params: IsingParams, tau: float) -> StateVector:
    """Normalized exp(-H*tau) applied to the uniform superposition.

    The Hamiltonian is diagonal, so the state has amplitudes proportional to
    exp(-tau * E_z); it is the exact imaginary-time flow the variational
    evolution approximates.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    energies = _all_energies(params)
    log_weights = -tau * energies
    amps = np.exp(log_weights - np.max(log_weights)).astype(np.complex128)
    amps /= np.linalg.norm(amps)
    return StateVector(params.n_units, amps)


def gibbs_target_state(params: IsingParams) -> StateVector:
    """Pure state whose basis distribution is exactly the Gibbs distribution.

    Amplitudes are exp(-H(sigma)/2)/sqrt(Z): real, nonnegative, and squaring
    to :func:`boltzmann_distribution`.
    """
    return imaginary_time_state(params, 0.5)


def exact_thermal_gradient(params: IsingParams) -> np.ndarray:
    """<dH/du> under the Gibbs distribution, by exhaustive enumeration."""
    probs = boltzmann_distribution(params)
    spins = all_spin_configs(params.n_units).astype(float)
    components = [
        -float(probs @ (spins[:, i] * spins[:, j]))
        for i, j in spin_pairs(params.n_units)
    ]
    components.extend(-(probs @ spins))
    return np.asarray(components)
