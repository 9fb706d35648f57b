"""Self-contained statevector simulation of a hardware-efficient variational
eigensolver, used as a sub-problem solver for the selection objective.

Circuit: one R_Y rotation layer, a linear CNOT entangling chain
(q0->q1, q1->q2, ...), and a second R_Y layer; 2n parameters for n qubits.

    R_Y(theta) = [[cos(theta/2), -sin(theta/2)],
                  [sin(theta/2), cos(theta/2)]]

All gates are real, so the state stays real up to float noise. Basis index
convention: qubit 0 is the most significant bit of the 2^n amplitude index,
matching bitstrings printed with variable 0 leftmost.

Because the target Hamiltonian is diagonal, the energy of every sampled
bitstring is evaluated classically; no Pauli-term measurement batching is
needed. With the spin convention Z|0> = +|0> and T = (1 + Z)/2, a measured
bit m corresponds to the selection bit t = 1 - m; results are reported in
t-convention (bit=1 <=> triplet selected).

The optimizer is coordinate-wise: the cost along any single R_Y angle is an
exact sinusoid c0 + c1*cos(theta - c2), reconstructed from three evaluations
(current and +-pi/2), after which the parameter jumps to the sinusoid's
global minimum.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .qubo import Assignment, IsingHamiltonian, Qubo, to_ising

MAX_QUBITS = 20

# vector of 2n rotation angles: first layer then second layer
AnsatzParams = np.ndarray


class ResourceError(ValueError):
    pass


@dataclass(frozen=True)
class VqeConfig:
    shots: int = 512            # samples per energy estimate; 0 = exact expectation
    max_evaluations: int = 300  # optimizer budget in energy evaluations
    seed: int = 0
    readout_flip_probability: float = 0.0  # hook for a symmetric bit-flip readout error

    def __post_init__(self):
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if not 0.0 <= self.readout_flip_probability < 1.0:
            raise ValueError("readout_flip_probability must be in [0, 1)")


def _apply_ry(psi: np.ndarray, qubit: int, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    gate = np.array([[c, -s], [s, c]], dtype=psi.dtype)
    moved = np.moveaxis(psi, qubit, 0)
    shape = moved.shape
    out = gate @ moved.reshape(2, -1)
    return np.moveaxis(out.reshape(shape), 0, qubit)


def _apply_cnot(psi: np.ndarray, control: int, target: int) -> None:
    sl = [slice(None)] * psi.ndim
    sl[control] = 1
    sub = psi[tuple(sl)]
    t_ax = target - 1 if target > control else target
    psi[tuple(sl)] = np.flip(sub, axis=t_ax).copy()


def prepare_state(params: AnsatzParams, n: int) -> np.ndarray:
    """Run the ansatz circuit on |0...0>, returning 2^n complex amplitudes."""
    if n > MAX_QUBITS:
        raise ResourceError(f"statevector simulation limited to {MAX_QUBITS} qubits")
    params = np.asarray(params, dtype=float)
    if params.shape != (2 * n,):
        raise ValueError(f"expected {2 * n} parameters, got {params.shape}")
    psi = np.zeros((2,) * n, dtype=np.complex128)
    psi[(0,) * n] = 1.0
    for q in range(n):
        psi = _apply_ry(psi, q, params[q])
    psi = np.ascontiguousarray(psi)
    for q in range(n - 1):
        _apply_cnot(psi, q, q + 1)
    for q in range(n):
        psi = _apply_ry(psi, q, params[n + q])
    return psi.reshape(-1)


def _probabilities(state: np.ndarray) -> np.ndarray:
    p = np.abs(state) ** 2
    total = p.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"state not normalized: sum |amp|^2 = {total!r}")
    return p / total


def sample_counts(state: np.ndarray, shots: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Measured basis-state indices for ``shots`` samples of |psi|^2."""
    return rng.choice(len(state), size=shots, p=_probabilities(state))


def energy_expectation(state: np.ndarray, ising: IsingHamiltonian, shots: int,
                       rng: np.random.Generator | None = None) -> float:
    """<H> exactly (shots=0) or as a Monte Carlo estimate from sampled bitstrings."""
    table = ising.measured_energy_table()
    if shots == 0:
        return float(_probabilities(state) @ table)
    if rng is None:
        raise ValueError("shots > 0 requires an rng")
    return float(table[sample_counts(state, shots, rng)].mean())


def nft_update(cost_along_parameter: Callable[[float], float],
               current_theta: float) -> float:
    """One sinusoid-reconstruction step for a single rotation angle.

    Evaluates the cost at the current angle and at +-pi/2, solves for
    (c0, c1, c2) in c0 + c1*cos(theta - c2), and returns the sinusoid's
    minimizer c2 + pi. A flat direction (c1 ~ 0) leaves theta unchanged.
    """
    z1 = cost_along_parameter(current_theta)
    z2 = cost_along_parameter(current_theta + math.pi / 2.0)
    z3 = cost_along_parameter(current_theta - math.pi / 2.0)
    c0 = 0.5 * (z2 + z3)
    amp_cos = z1 - c0            # c1 * cos(theta0 - c2)
    amp_sin = 0.5 * (z3 - z2)    # c1 * sin(theta0 - c2)
    c1 = math.hypot(amp_cos, amp_sin)
    if c1 < 1e-11 * max(1.0, abs(c0)):
        return current_theta
    phi = math.atan2(amp_sin, amp_cos)
    # step wrapped into (-pi, pi] so a converged angle stays put exactly
    step = math.remainder(math.pi - phi, 2.0 * math.pi)
    return current_theta + step


def measured_index_to_bitstring(index: int, n: int) -> str:
    """Selection bitstring (t = 1 - measured bit) with variable 0 leftmost."""
    return format(index ^ (2 ** n - 1), f"0{n}b")


def bitstring_to_bits(bitstring: str) -> Assignment:
    return np.array([1 if c == "1" else 0 for c in bitstring], dtype=np.int8)


@dataclass
class VqeResult:
    best_bitstring: str          # selection convention, variable 0 leftmost
    best_energy: float           # diagonal energy of that basis state
    counts: Counter              # final-state measurement histogram (selection bitstrings)
    final_expectation: float     # <H> of the optimized state (exact)
    evaluations: int
    thetas: np.ndarray = field(repr=False)

    @property
    def best_bits(self) -> Assignment:
        return bitstring_to_bits(self.best_bitstring)


def run_vqe(ising: IsingHamiltonian, config: VqeConfig | None = None) -> VqeResult:
    """Minimize <H> by cycling sinusoid updates over all 2n parameters.

    Returns the lowest-energy bitstring sampled anywhere during the run plus
    a final measurement histogram of ``shots`` samples. With shots=0 the
    run is fully deterministic apart from the random initial angles; the
    returned bitstring is then the lowest-energy basis state among those
    carrying non-negligible probability (> 1e-6) in the final state.

    Exact mode (shots=0) detects coordinate-descent fixed points; if budget
    remains it restarts from fresh random angles and keeps the best
    converged point, since the sinusoid updates can stall on basis states
    that are minima under every single-angle move.
    """
    config = config or VqeConfig()
    n = ising.n
    if n > MAX_QUBITS:
        raise ResourceError(f"statevector simulation limited to {MAX_QUBITS} qubits")
    rng = np.random.default_rng(config.seed)
    table = ising.measured_energy_table()
    thetas = rng.uniform(0.0, 2.0 * math.pi, size=2 * n)

    best_sampled_index: int | None = None
    best_sampled_energy = math.inf
    evaluations = 0

    def flip_readout(samples: np.ndarray) -> np.ndarray:
        p = config.readout_flip_probability
        if p == 0.0:
            return samples
        flips = (rng.random((len(samples), n)) < p).astype(np.int64)
        masks = (flips << np.arange(n - 1, -1, -1)).sum(axis=1)
        return samples ^ masks

    def evaluate(params: np.ndarray) -> float:
        nonlocal evaluations, best_sampled_index, best_sampled_energy
        evaluations += 1
        state = prepare_state(params, n)
        if config.shots == 0:
            return float(_probabilities(state) @ table)
        samples = flip_readout(sample_counts(state, config.shots, rng))
        energies = table[samples]
        lowest = int(np.argmin(energies))
        if energies[lowest] < best_sampled_energy:
            best_sampled_energy = float(energies[lowest])
            best_sampled_index = int(samples[lowest])
        return float(energies.mean())

    def exact_expectation(params: np.ndarray) -> float:
        return float(_probabilities(prepare_state(params, n)) @ table)

    best_thetas = thetas.copy()
    best_expectation = math.inf
    previous_sweep = math.inf
    while evaluations + 3 <= config.max_evaluations:
        for d in range(2 * n):
            if evaluations + 3 > config.max_evaluations:
                break

            def cost(theta: float, _d: int = d) -> float:
                trial = thetas.copy()
                trial[_d] = theta
                return evaluate(trial)

            thetas[d] = nft_update(cost, thetas[d])
        if config.shots == 0:
            # exact mode: bank the best sweep result and restart from fresh
            # angles once a sweep stops improving (single-angle descent can
            # stall on basis states minimal under every one-parameter move)
            sweep_cost = exact_expectation(thetas)
            if sweep_cost < best_expectation:
                best_expectation = sweep_cost
                best_thetas = thetas.copy()
            if previous_sweep - sweep_cost < 1e-9:
                thetas = rng.uniform(0.0, 2.0 * math.pi, size=2 * n)
                previous_sweep = math.inf
            else:
                previous_sweep = sweep_cost

    if config.shots == 0 and exact_expectation(thetas) > best_expectation:
        thetas = best_thetas

    final_state = prepare_state(thetas, n)
    probs = _probabilities(final_state)
    final_expectation = float(probs @ table)

    counts: Counter = Counter()
    if config.shots > 0:
        samples = flip_readout(sample_counts(final_state, config.shots, rng))
        for s in samples.tolist():
            counts[measured_index_to_bitstring(s, n)] += 1
        energies = table[samples]
        lowest = int(np.argmin(energies))
        if energies[lowest] < best_sampled_energy:
            best_sampled_energy = float(energies[lowest])
            best_sampled_index = int(samples[lowest])
        best_index = best_sampled_index
    else:
        support = np.nonzero(probs > 1e-6)[0]
        best_index = int(support[np.argmin(table[support])])

    return VqeResult(
        best_bitstring=measured_index_to_bitstring(int(best_index), n),
        best_energy=float(table[best_index]),
        counts=counts,
        final_expectation=final_expectation,
        evaluations=evaluations,
        thetas=thetas,
    )


def make_vqe_subsolver(shots: int = 512, max_evaluations: int = 300):
    """Adapter: use the simulated VQE as a sub-problem solver."""
    def _solve(problem: Qubo, rng: np.random.Generator) -> Assignment:
        config = VqeConfig(shots=shots, max_evaluations=max_evaluations,
                           seed=int(rng.integers(2 ** 31)))
        return run_vqe(to_ising(problem), config).best_bits
    return _solve
