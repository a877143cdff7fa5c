"""Boltzmann machine training loop with a quantum-estimated model term.

The divergence gradient splits into a data part (moments of the training
samples, computed once) and a model part (thermal moments of the current
Ising parameters).  The model part is read off a pure state produced by the
variational imaginary-time evolution: its basis distribution matches the
Gibbs distribution, and every gradient observable is diagonal, so the pure
state and the thermal ensemble give identical expectations.

Each outer iteration resets the circuit angles to zero and re-evolves from
scratch before taking one gradient step on the Ising parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ansatz import build_ansatz
from .ising import (
    IsingParams,
    all_spin_configs,
    boltzmann_distribution,
    gibbs_target_state,
    gradient_observables,
    kld,
    quantum_hamiltonian,
    spin_pairs,
)
from .statevector import expectation, fidelity
from .varqite import EvolutionConfig, ShotBackend, evolve

__all__ = [
    "TrainingSet",
    "LearnConfig",
    "LearnRecord",
    "sample_true_params",
    "generate_training_data",
    "empirical_distribution",
    "data_moment_vector",
    "kld_gradient",
    "train",
    "save_training_set",
    "load_training_set",
]

Seed = "int | np.random.SeedSequence"


@dataclass(frozen=True)
class TrainingSet:
    """D spin configurations of N units each, entries strictly +/-1."""

    n_units: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.int8)
        if samples.ndim != 2 or samples.shape[1] != self.n_units:
            raise ValueError(f"samples must have shape (D, {self.n_units})")
        if not np.all(np.abs(samples) == 1):
            raise ValueError("samples must contain only +1 and -1")
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class LearnConfig:
    """Gradient-descent settings for one training run."""

    eta: float = 0.1
    n_step: int = 100
    evolution: EvolutionConfig = EvolutionConfig(delta_tau=0.1, tau_final=0.5)
    init_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 0.5:
            raise ValueError("eta must satisfy 0 < eta <= 0.5")
        if self.n_step < 1:
            raise ValueError("n_step must be positive")


@dataclass
class LearnRecord:
    """Per-step training history, index 0 holding the initial parameters.

    ``kld_true`` compares the model against the reference distribution when
    one was supplied (NaN otherwise); ``kld_data`` always compares against
    the empirical distribution.  ``fidelity`` holds the overlap of each
    step's evolved state with its Gibbs target (NaN at index 0, where no
    evolution has run yet).
    """

    u_history: np.ndarray
    kld_true: np.ndarray
    kld_data: np.ndarray
    fidelity: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.u_history.shape[0] - 1

    def final_params(self, n_units: int) -> IsingParams:
        return IsingParams.from_vector(n_units, self.u_history[-1])

    def to_csv(self, path: str | Path) -> None:
        """Columns: step, kld_true, kld_data, fidelity, u_0..u_{dim-1}."""
        dim = self.u_history.shape[1]
        header = "step,kld_true,kld_data,fidelity," + ",".join(
            f"u_{i}" for i in range(dim)
        )
        lines = [header]
        for s in range(self.u_history.shape[0]):
            fields = [str(s)] + [
                f"{v:.17g}"
                for v in (self.kld_true[s], self.kld_data[s], self.fidelity[s])
            ]
            fields.extend(f"{v:.17g}" for v in self.u_history[s])
            lines.append(",".join(fields))
        Path(path).write_text("\n".join(lines) + "\n")


def sample_true_params(n_units: int, seed) -> IsingParams:
    """Ising parameters with i.i.d. standard-normal components."""
    dim = n_units * (n_units - 1) // 2 + n_units
    vector = np.random.default_rng(seed).standard_normal(dim)
    return IsingParams.from_vector(n_units, vector)


def generate_training_data(u_star: IsingParams, n_samples: int, seed) -> TrainingSet:
    """Exact i.i.d. Gibbs samples by inverting the cumulative table."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    probs = boltzmann_distribution(u_star)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    draws = np.random.default_rng(seed).random(n_samples)
    indices = np.searchsorted(cdf, draws, side="right")
    return TrainingSet(u_star.n_units, all_spin_configs(u_star.n_units)[indices])


def empirical_distribution(data: TrainingSet) -> np.ndarray:
    """Relative frequency of each configuration, in basis-index order."""
    if data.n_samples == 0:
        raise ValueError("training set is empty")
    n = data.n_units
    bits = (1 - data.samples.astype(np.int64)) // 2
    indices = bits @ (1 << (n - 1 - np.arange(n)))
    counts = np.bincount(indices, minlength=2**n)
    return counts / data.n_samples


def data_moment_vector(data: TrainingSet) -> np.ndarray:
    """Training-data average of dH/du; independent of the model parameters.

    Component order matches the flattened Ising vector: -<s_i s_j> for each
    pair, then -<s_i> for each field.
    """
    if data.n_samples == 0:
        raise ValueError("training set is empty")
    s = data.samples.astype(float)
    moments = [-float(np.mean(s[:, i] * s[:, j])) for i, j in spin_pairs(data.n_units)]
    moments.extend(-s.mean(axis=0))
    return np.asarray(moments)


def kld_gradient(model_grad: np.ndarray, data_grad: np.ndarray) -> np.ndarray:
    """Divergence gradient: data moments minus model moments of dH/du."""
    model_grad = np.asarray(model_grad, dtype=float)
    data_grad = np.asarray(data_grad, dtype=float)
    if model_grad.shape != data_grad.shape:
        raise ValueError(f"length mismatch: {model_grad.shape} vs {data_grad.shape}")
    return -model_grad + data_grad


def _step_evolution(config: EvolutionConfig, step: int) -> EvolutionConfig:
    if isinstance(config.backend, ShotBackend):
        seed = int(
            np.random.SeedSequence((config.backend.seed, 2, step)).generate_state(1)[0]
        )
        return replace(config, backend=replace(config.backend, seed=seed))
    return config


def train(
    data: TrainingSet, config: LearnConfig, reference: IsingParams | None = None
) -> LearnRecord:
    """Gradient-descent the Ising parameters against the training data.

    The initial guess is standard normal (from ``config.init_seed``).  Every
    step re-evolves the ansatz from zero angles under the current quantum
    Hamiltonian, reads the model moments from the evolved state, and updates
    the parameters.  With ``reference`` supplied, the recorded ``kld_true``
    measures the model against that distribution.
    """
    n = data.n_units
    circuit = build_ansatz(n)
    data_grad = data_moment_vector(data)
    p_data = empirical_distribution(data)
    p_reference = boltzmann_distribution(reference) if reference is not None else None

    u = sample_true_params(n, config.init_seed)
    u_history = np.empty((config.n_step + 1, u.dim))
    kld_true = np.full(config.n_step + 1, math.nan)
    kld_data = np.empty(config.n_step + 1)
    fidelities = np.full(config.n_step + 1, math.nan)

    def record(step: int, params: IsingParams) -> None:
        u_history[step] = params.to_vector()
        model = boltzmann_distribution(params)
        kld_data[step] = kld(p_data, model)
        if p_reference is not None:
            kld_true[step] = kld(p_reference, model)

    record(0, u)
    for step in range(1, config.n_step + 1):
        _, state = evolve(
            circuit, quantum_hamiltonian(u), _step_evolution(config.evolution, step)
        )
        model_grad = np.asarray(
            [expectation(state, obs) for obs in gradient_observables(u)]
        )
        fidelities[step] = fidelity(state, gibbs_target_state(u))
        u_vector = u.to_vector() - config.eta * kld_gradient(model_grad, data_grad)
        if not np.all(np.isfinite(u_vector)):
            raise RuntimeError(f"parameters became non-finite at step {step}")
        u = IsingParams.from_vector(n, u_vector)
        record(step, u)
    return LearnRecord(u_history, kld_true, kld_data, fidelities)


def save_training_set(data: TrainingSet, path: str | Path) -> None:
    """One line per sample: N space-separated +/-1 tokens."""
    lines = [" ".join(str(int(v)) for v in row) for row in data.samples]
    Path(path).write_text("\n".join(lines) + "\n")


def load_training_set(path: str | Path) -> TrainingSet:
    rows = [
        [int(tok) for tok in line.split()]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    if not rows:
        raise ValueError(f"no samples in {path}")
    return TrainingSet(len(rows[0]), np.asarray(rows, dtype=np.int8))
