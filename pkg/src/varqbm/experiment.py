"""Experiment orchestration and the ``varqbm`` command-line interface.

``run_experiment`` trains one Boltzmann machine per group of synthetic
training data and aggregates the divergence and fidelity statistics across
groups into schema-stable CSV files, so any plotting tool can reproduce the
convergence curves, histograms, and fidelity traces.  Runs are deterministic
per master seed under the exact backend.

Output files (all with a one-line header, floats at 17 significant digits):

* ``group_<l>.csv``     per-group training history
* ``aggregate.csv``     step, mean and standard deviation of KLD over groups
* ``hist_step<k>.csv``  20 uniform KLD bins over [0, 0.26] plus an overflow bin
* ``fidelity.csv``      step, min and mean evolved-state fidelity over groups
* ``config.json``, ``circuit.json``  resolved configuration and ansatz
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .ansatz import build_ansatz, circuit_to_dict, prepare_state
from .ising import (
    IsingParams,
    all_spin_configs,
    boltzmann_distribution,
    exact_thermal_gradient,
    gibbs_target_state,
    imaginary_time_state,
    partition_function,
    quantum_hamiltonian,
)
from .learner import (
    LearnConfig,
    LearnRecord,
    generate_training_data,
    sample_true_params,
    train,
)
from .statevector import expectation, fidelity
from .varqite import EXACT, EvolutionConfig, ShotBackend, evolve

__all__ = [
    "ExperimentConfig",
    "HistogramSpec",
    "AggregateReport",
    "run_experiment",
    "cli_main",
    "main",
    "parse_backend",
]

logger = logging.getLogger(__name__)

HIST_STEPS = (25, 50, 100)
HIST_RANGE = (0.0, 0.26)
HIST_BINS = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment settings; defaults are the reference protocol."""

    n_units: int = 4
    n_groups: int = 30
    n_samples: int = 1000
    n_step: int = 100
    delta_tau: float = 0.1
    tau_final: float = 0.5
    eta: float = 0.1
    regularization: float = 1e-3
    backend: str = EXACT
    master_seed: int = 0
    out_dir: str = "results"

    def __post_init__(self) -> None:
        for name in ("n_units", "n_groups", "n_samples", "n_step"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        parse_backend(self.backend, 0)  # validates the syntax

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class HistogramSpec:
    """Counts of per-group KLD values at one step, with an overflow bin."""

    step: int
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class AggregateReport:
    """Cross-group statistics computed by :func:`run_experiment`."""

    steps: np.ndarray
    kld_mean: np.ndarray
    kld_std: np.ndarray
    histograms: tuple[HistogramSpec, ...]
    fidelity_steps: np.ndarray
    fidelity_min: np.ndarray
    fidelity_mean: np.ndarray
    group_fidelity_min: np.ndarray


def parse_backend(spec: str, seed: int) -> str | ShotBackend:
    """Backend selector syntax: ``exact`` or ``shots:COUNT``."""
    if spec == EXACT:
        return EXACT
    if spec.startswith("shots:"):
        try:
            count = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad shot count in backend spec {spec!r}") from None
        return ShotBackend(count, seed)
    raise ValueError(f"unknown backend spec {spec!r} (use 'exact' or 'shots:COUNT')")


def _group_seeds(master_seed: int, group: int) -> tuple:
    children = np.random.SeedSequence((master_seed, group)).spawn(4)
    shots_seed = int(children[3].generate_state(1)[0])
    return children[0], children[1], children[2], shots_seed


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_csv(path: Path, header: str, rows: list[list[str]]) -> None:
    lines = [header] + [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _histogram(values: np.ndarray, step: int) -> HistogramSpec:
    """Half-open uniform bins over [0, 0.26); values at or above 0.26 overflow."""
    edges = np.linspace(HIST_RANGE[0], HIST_RANGE[1], HIST_BINS + 1)
    bin_lo = np.append(edges[:-1], HIST_RANGE[1])
    bin_hi = np.append(edges[1:], math.inf)
    counts = np.zeros(HIST_BINS + 1, dtype=int)
    width = (HIST_RANGE[1] - HIST_RANGE[0]) / HIST_BINS
    for v in values:
        idx = int(v // width) if v < HIST_RANGE[1] else HIST_BINS
        counts[min(idx, HIST_BINS)] += 1
    if counts[HIST_BINS]:
        logger.warning(
            "step %d: %d KLD value(s) above %.2f landed in the overflow bin",
            step,
            int(counts[HIST_BINS]),
            HIST_RANGE[1],
        )
    return HistogramSpec(step, bin_lo, bin_hi, counts)


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """Train one model per group and write all result files.

    Group l draws its true parameters, training data, initial guess, and any
    sampling seeds from streams derived from (master_seed, l), so reruns with
    the same configuration produce byte-identical outputs under the exact
    backend.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records: list[LearnRecord] = []
    for group in range(1, config.n_groups + 1):
        star_seed, data_seed, init_seed, shots_seed = _group_seeds(
            config.master_seed, group
        )
        u_star = sample_true_params(config.n_units, star_seed)
        data = generate_training_data(u_star, config.n_samples, data_seed)
        evolution = EvolutionConfig(
            delta_tau=config.delta_tau,
            tau_final=config.tau_final,
            regularization=config.regularization,
            backend=parse_backend(config.backend, shots_seed),
        )
        learn = LearnConfig(
            eta=config.eta,
            n_step=config.n_step,
            evolution=evolution,
            init_seed=init_seed,
        )
        try:
            record = train(data, learn, reference=u_star)
        except Exception as exc:
            raise RuntimeError(f"training failed for group {group}: {exc}") from exc
        record.to_csv(out / f"group_{group}.csv")
        records.append(record)
        logger.info(
            "group %d/%d: final KLD %.4g, min fidelity %.4f",
            group,
            config.n_groups,
            record.kld_true[-1],
            float(np.nanmin(record.fidelity)),
        )

    steps = np.arange(config.n_step + 1)
    kld_matrix = np.stack([r.kld_true for r in records])  # (L, n_step + 1)
    kld_mean = kld_matrix.mean(axis=0)
    kld_std = kld_matrix.std(axis=0)
    _write_csv(
        out / "aggregate.csv",
        "step,kld_mean,kld_std",
        [[str(s), _fmt(kld_mean[s]), _fmt(kld_std[s])] for s in steps],
    )

    histograms = []
    for step in HIST_STEPS:
        if step > config.n_step:
            continue
        hist = _histogram(kld_matrix[:, step], step)
        histograms.append(hist)
        _write_csv(
            out / f"hist_step{step}.csv",
            "bin_lo,bin_hi,count",
            [
                [_fmt(lo), _fmt(hi), str(int(c))]
                for lo, hi, c in zip(hist.bin_lo, hist.bin_hi, hist.counts)
            ],
        )

    fidelity_matrix = np.stack([r.fidelity[1:] for r in records])  # (L, n_step)
    fidelity_steps = np.arange(1, config.n_step + 1)
    fidelity_min = fidelity_matrix.min(axis=0)
    fidelity_mean = fidelity_matrix.mean(axis=0)
    _write_csv(
        out / "fidelity.csv",
        "step,min,mean",
        [
            [str(s), _fmt(fidelity_min[i]), _fmt(fidelity_mean[i])]
            for i, s in enumerate(fidelity_steps)
        ],
    )

    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    circuit = build_ansatz(config.n_units)
    (out / "circuit.json").write_text(json.dumps(circuit_to_dict(circuit), indent=2) + "\n")

    return AggregateReport(
        steps=steps,
        kld_mean=kld_mean,
        kld_std=kld_std,
        histograms=tuple(histograms),
        fidelity_steps=fidelity_steps,
        fidelity_min=fidelity_min,
        fidelity_mean=fidelity_mean,
        group_fidelity_min=fidelity_matrix.min(axis=1),
    )


def _load_params(args: argparse.Namespace) -> IsingParams:
    if args.params is not None:
        return IsingParams.from_dict(json.loads(Path(args.params).read_text()))
    if args.seed is not None:
        return sample_true_params(args.units, args.seed)
    return IsingParams.zeros(args.units)


def _cmd_run(args: argparse.Namespace) -> int:
    settings = {}
    if args.config is not None:
        settings = json.loads(Path(args.config).read_text())
        if not isinstance(settings, dict):
            raise ValueError("config file must hold a flat JSON object")
    overrides = {
        "master_seed": args.seed,
        "n_groups": args.groups,
        "n_step": args.steps,
        "backend": args.backend,
        "out_dir": args.out,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig.from_dict(settings)
    report = run_experiment(config)
    print(f"groups: {config.n_groups}  steps: {config.n_step}")
    print(f"final mean KLD: {report.kld_mean[-1]:.6g} (std {report.kld_std[-1]:.6g})")
    print(f"worst per-group fidelity: {report.group_fidelity_min.min():.6f}")
    print(f"results written to {config.out_dir}")
    return 0


def _cmd_evolve(args: argparse.Namespace) -> int:
    params = _load_params(args)
    circuit = build_ansatz(params.n_units)
    config = EvolutionConfig(
        delta_tau=args.delta_tau,
        tau_final=args.tau_final,
        regularization=args.regularization,
        backend=parse_backend(args.backend, args.seed or 0),
    )
    hamiltonian = quantum_hamiltonian(params)
    trajectory, final_state = evolve(circuit, hamiltonian, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = (
        "tau,"
        + ",".join(f"theta_{k}" for k in range(circuit.n_params))
        + ",energy,fidelity_vs_target"
    )
    rows = []
    for step, theta in enumerate(trajectory):
        tau = step * config.delta_tau
        state = prepare_state(circuit, theta)
        energy = expectation(state, hamiltonian)
        overlap = fidelity(state, imaginary_time_state(params, tau))
        rows.append(
            [_fmt(tau)]
            + [_fmt(v) for v in theta]
            + [_fmt(energy), _fmt(overlap)]
        )
    _write_csv(out / "trajectory.csv", header, rows)

    final_fidelity = fidelity(final_state, gibbs_target_state(params))
    print(f"steps: {config.n_steps}  parameters: {circuit.n_params}")
    print(f"final fidelity vs Gibbs target: {final_fidelity:.6f}")
    print(f"trajectory written to {out / 'trajectory.csv'}")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    params = _load_params(args)
    probs = boltzmann_distribution(params)
    spins = all_spin_configs(params.n_units)
    print("config : probability")
    for row, p in zip(spins, probs):
        label = " ".join(f"{int(v):+d}" for v in row)
        print(f"{label} : {p:.17g}")
    print(f"log_Z = {partition_function(params):.17g}")
    gradient = exact_thermal_gradient(params)
    print("thermal_gradient = [" + ", ".join(f"{v:.17g}" for v in gradient) + "]")
    return 0


def _check_suite(n_units: int) -> list[tuple[str, bool, str]]:
    """Fast invariant checks used by the ``check`` subcommand."""
    from .ansatz import state_jacobian
    from .statevector import basis_distribution
    from .varqite import compute_evolution_gradient, compute_metric

    rng = np.random.default_rng(2024)
    results = []

    def run(name, fn):
        try:
            detail = fn() or ""
            results.append((name, True, detail))
        except Exception as exc:
            results.append((name, False, str(exc)))

    def check_norms():
        circuit = build_ansatz(n_units)
        theta = rng.uniform(-np.pi, np.pi, circuit.n_params)
        state = prepare_state(circuit, theta)
        drift = abs(np.linalg.norm(state.amplitudes) - 1.0)
        assert drift < 1e-10, f"norm drift {drift:.3e}"
        return f"norm drift {drift:.1e}"

    def check_derivatives():
        circuit = build_ansatz(n_units)
        theta = rng.uniform(-np.pi, np.pi, circuit.n_params)
        jac = state_jacobian(circuit, theta)
        eps = 1e-4
        worst = 0.0
        for k in range(circuit.n_params):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += eps
            tm[k] -= eps
            fd = (
                prepare_state(circuit, tp).amplitudes
                - prepare_state(circuit, tm).amplitudes
            ) / (2 * eps)
            worst = max(worst, float(np.max(np.abs(jac[k] - fd))))
        assert worst < 1e-6, f"derivative error {worst:.3e}"
        return f"max derivative error {worst:.1e}"

    def check_diagonal_identity():
        params = sample_true_params(n_units, rng.integers(1 << 31))
        gap = np.max(
            np.abs(
                basis_distribution(gibbs_target_state(params))
                - boltzmann_distribution(params)
            )
        )
        assert gap < 1e-12, f"distribution gap {gap:.3e}"
        return f"distribution gap {gap:.1e}"

    def check_estimator_identity():
        from .ising import gradient_observables

        params = sample_true_params(n_units, rng.integers(1 << 31))
        state = gibbs_target_state(params)
        estimate = np.asarray(
            [expectation(state, obs) for obs in gradient_observables(params)]
        )
        gap = float(np.max(np.abs(estimate - exact_thermal_gradient(params))))
        assert gap < 1e-10, f"estimator gap {gap:.3e}"
        return f"estimator gap {gap:.1e}"

    def check_mclachlan():
        circuit = build_ansatz(2)
        theta = rng.uniform(-np.pi, np.pi, circuit.n_params)
        params = sample_true_params(2, rng.integers(1 << 31))
        hamiltonian = quantum_hamiltonian(params)
        metric = compute_metric(circuit, theta)
        gradient = compute_evolution_gradient(circuit, theta, hamiltonian)
        eps = 1e-4
        fd_states = []
        for k in range(circuit.n_params):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += eps
            tm[k] -= eps
            fd_states.append(
                (
                    prepare_state(circuit, tp).amplitudes
                    - prepare_state(circuit, tm).amplitudes
                )
                / (2 * eps)
            )
        fd = np.asarray(fd_states)
        metric_gap = float(np.max(np.abs(metric - np.real(np.conj(fd) @ fd.T))))
        energy_fd = np.empty(circuit.n_params)
        for k in range(circuit.n_params):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += eps
            tm[k] -= eps
            energy_fd[k] = (
                expectation(prepare_state(circuit, tp), hamiltonian)
                - expectation(prepare_state(circuit, tm), hamiltonian)
            ) / (2 * eps)
        gradient_gap = float(np.max(np.abs(gradient + 0.5 * energy_fd)))
        assert metric_gap < 1e-6 and gradient_gap < 1e-6, (
            f"metric gap {metric_gap:.3e}, gradient gap {gradient_gap:.3e}"
        )
        return f"metric gap {metric_gap:.1e}, gradient gap {gradient_gap:.1e}"

    def check_energy_descent():
        params = sample_true_params(n_units, rng.integers(1 << 31))
        circuit = build_ansatz(n_units)
        hamiltonian = quantum_hamiltonian(params)
        trajectory, _ = evolve(
            circuit, hamiltonian, EvolutionConfig(delta_tau=0.1, tau_final=0.5)
        )
        energies = [
            expectation(prepare_state(circuit, theta), hamiltonian)
            for theta in trajectory
        ]
        rise = max(b - a for a, b in zip(energies, energies[1:]))
        assert rise < 1e-6, f"energy rose by {rise:.3e}"
        return f"max energy rise {rise:.1e}"

    run("statevector norm preservation", check_norms)
    run("ansatz derivative expansion", check_derivatives)
    run("Gibbs diagonal identity", check_diagonal_identity)
    run("pure-state thermal estimator", check_estimator_identity)
    run("McLachlan system vs finite differences", check_mclachlan)
    run("imaginary-time energy descent", check_energy_descent)
    return results


def _cmd_check(args: argparse.Namespace) -> int:
    results = _check_suite(min(args.units, 4))
    failed = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{status}: {name}{suffix}")
        failed += not ok
    return 1 if failed else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varqbm",
        description=(
            "Train Ising Boltzmann machines with model expectations from a "
            "variational imaginary-time-evolved quantum register."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="full multi-group experiment")
    run_p.add_argument("--config", help="JSON config file (flat object)")
    run_p.add_argument("--seed", type=int, help="master seed override")
    run_p.add_argument("--groups", type=int, help="number of training-data groups")
    run_p.add_argument("--steps", type=int, help="gradient steps per group")
    run_p.add_argument("--backend", help="exact or shots:COUNT")
    run_p.add_argument("--out", help="output directory")
    run_p.set_defaults(handler=_cmd_run)

    def add_params_args(p):
        p.add_argument("--units", type=int, default=4, help="number of units N")
        p.add_argument("--params", help="JSON file with Ising parameters")
        p.add_argument(
            "--seed",
            type=int,
            help="draw standard-normal parameters from this seed "
            "(omit --params and --seed for all-zero parameters)",
        )

    evolve_p = sub.add_parser("evolve", help="single imaginary-time evolution")
    add_params_args(evolve_p)
    evolve_p.add_argument("--delta-tau", type=float, default=0.1)
    evolve_p.add_argument("--tau-final", type=float, default=0.5)
    evolve_p.add_argument("--regularization", type=float, default=1e-6)
    evolve_p.add_argument("--backend", default=EXACT, help="exact or shots:COUNT")
    evolve_p.add_argument("--out", default=".", help="directory for trajectory.csv")
    evolve_p.set_defaults(handler=_cmd_evolve)

    oracle_p = sub.add_parser("oracle", help="exact Gibbs table and thermal gradient")
    add_params_args(oracle_p)
    oracle_p.set_defaults(handler=_cmd_oracle)

    check_p = sub.add_parser("check", help="run the fast invariant suite")
    check_p.add_argument("--units", type=int, default=4)
    check_p.set_defaults(handler=_cmd_check)
    return parser


def cli_main(argv: list[str]) -> int:
    """Entry point returning a process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/diagnostics
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (ValueError, OSError, json.JSONDecodeError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    sys.exit(cli_main(sys.argv[1:]))
