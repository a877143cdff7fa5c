"""Ising Boltzmann machine learning with variational imaginary-time evolution.

A fully visible Boltzmann machine is trained by gradient descent on the
Kullback-Leibler divergence; the model-side thermal moments are read from a
pure state prepared on a simulated quantum register via McLachlan
imaginary-time evolution of a parametrized circuit.
"""

from .ansatz import (
    DerivativeTerm,
    ParamCircuit,
    ParamGate,
    build_ansatz,
    derivative_expansion,
    derivative_state,
    prepare_state,
)
from .ising import (
    IsingParams,
    boltzmann_distribution,
    classical_energy,
    exact_thermal_gradient,
    gibbs_target_state,
    gradient_observables,
    imaginary_time_state,
    kld,
    partition_function,
    quantum_hamiltonian,
)
from .learner import (
    LearnConfig,
    LearnRecord,
    TrainingSet,
    data_moment_vector,
    empirical_distribution,
    generate_training_data,
    kld_gradient,
    sample_true_params,
    train,
)
from .statevector import (
    Gate,
    PauliSum,
    PauliTerm,
    StateVector,
    apply_gate,
    apply_pauli,
    basis_distribution,
    expectation,
    fidelity,
    init_plus,
    inner_product,
)
from .varqite import (
    EvolutionConfig,
    HadamardTestSpec,
    McLachlanSystem,
    ShotBackend,
    compute_evolution_gradient,
    compute_metric,
    evolve,
    hadamard_test_estimate,
    hadamard_test_exact,
    mclachlan_system,
    solve_step,
)
from .experiment import AggregateReport, ExperimentConfig, cli_main, run_experiment

__version__ = "0.1.0"
