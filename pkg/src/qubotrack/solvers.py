"""QUBO solvers: exact enumeration, impact-ordered sub-problem iteration,
and a simulated-annealing baseline.

Large problems are split into sub-problems of at most ``k`` variables by
sorting variables on the magnitude of their flip impact and cutting the
sorted list into consecutive groups. Each sub-problem keeps a boundary
term per variable (the summed interactions with the frozen outside
assignment folded into its linear coefficient), is solved by a pluggable
sub-solver, and the merged solution is accepted only if the global
objective does not increase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qubo import Assignment, Qubo, impacts, objective

EXACT_ENUMERATION_LIMIT = 24
_CHUNK_BITS = 16

# sub-solver contract: (sub-problem, per-call rng) -> bit vector
SubSolver = Callable[[Qubo, np.random.Generator], Assignment]


class ProblemSizeError(ValueError):
    pass


def solve_exact(qubo: Qubo) -> Assignment:
    """Globally minimal assignment by full enumeration (n <= 24).

    States are enumerated as integers with variable 0 in the least
    significant bit; ties resolve to the first (smallest) state index,
    so the all-zero assignment wins on a fully degenerate objective.
    """
    n = qubo.n
    if n > EXACT_ENUMERATION_LIMIT:
        raise ProblemSizeError(
            f"exact enumeration limited to n <= {EXACT_ENUMERATION_LIMIT}, got {n}"
        )
    a = qubo.linear
    b = qubo.coupling_matrix()
    best_energy = np.inf
    best_state = 0
    var_bits = np.arange(n)
    for start in range(0, 2 ** n, 2 ** _CHUNK_BITS):
        stop = min(start + 2 ** _CHUNK_BITS, 2 ** n)
        states = np.arange(start, stop)
        bits = ((states[:, None] >> var_bits[None, :]) & 1).astype(float)
        energies = bits @ a + 0.5 * np.einsum("si,si->s", bits @ b, bits)
        local = int(np.argmin(energies))
        if energies[local] < best_energy:
            best_energy = float(energies[local])
            best_state = start + local
    return ((best_state >> var_bits) & 1).astype(np.int8)


@dataclass
class SubQubo:
    """Restriction of a problem to ``indices``, boundary terms folded in.

    ``problem.linear`` holds a_i plus the sum of interactions with the
    frozen outside assignment; minimising it over the subset is equivalent
    to minimising the full objective with outside variables fixed.
    """

    indices: np.ndarray
    problem: Qubo


def _impact_groups(qubo: Qubo, bits: Assignment, k: int) -> list[np.ndarray]:
    """Group variables by descending |impact| into runs of at most k.

    Indices inside a group are sorted ascending: the grouping is what the
    decomposition depends on, and a canonical in-group order keeps exact
    sub-solves (and their tie-breaks) aligned with the full problem.
    """
    if k < 1:
        raise ValueError("sub-problem size k must be >= 1")
    order = np.argsort(-np.abs(impacts(qubo, bits)), kind="stable")
    return [np.sort(order[start:start + k]) for start in range(0, qubo.n, k)]


def extract_subqubos(qubo: Qubo, bits: Assignment, k: int) -> list[SubQubo]:
    """Partition variables by descending |impact| into sub-problems of size <= k."""
    return [_restrict(qubo, bits, g) for g in _impact_groups(qubo, bits, k)]


def _restrict(qubo: Qubo, bits: Assignment, indices: np.ndarray) -> SubQubo:
    t = np.asarray(bits, dtype=float)
    b = qubo.coupling_matrix()
    inside = b[np.ix_(indices, indices)]
    boundary = b[indices] @ t - inside @ t[indices]
    local_pos = {int(g): l for l, g in enumerate(indices)}
    quadratic = {}
    for (i, j), bij in qubo.quadratic.items():
        li, lj = local_pos.get(i), local_pos.get(j)
        if li is not None and lj is not None:
            quadratic[(min(li, lj), max(li, lj))] = bij
    sub = Qubo(n=len(indices), linear=qubo.linear[indices] + boundary,
               quadratic=quadratic)
    return SubQubo(indices=np.asarray(indices), problem=sub)


@dataclass
class SolveReport:
    best_assignment: Assignment
    best_objective: float
    iterations_run: int
    subqubo_count: int
    objective_trace: list[float]
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "best_assignment": "".join(str(int(v)) for v in self.best_assignment),
            "best_objective": self.best_objective,
            "iterations_run": self.iterations_run,
            "subqubo_count": self.subqubo_count,
            "objective_trace": self.objective_trace,
            "warning": self.warning,
        }


def exact_subsolver(problem: Qubo, rng: np.random.Generator) -> Assignment:
    return solve_exact(problem)


def solve_iterative(qubo: Qubo, subsolver: SubSolver, k: int = 7,
                    max_iterations: int = 10, seed: int = 0,
                    update: str = "gauss-seidel") -> SolveReport:
    """Iterative impact-ordered decomposition, starting from all-ones.

    Per iteration the variables are regrouped by |impact| and each group is
    solved by ``subsolver``. In the default ``gauss-seidel`` mode groups
    are solved sequentially, each seeing the running assignment, with a
    per-group guard that rejects objective-increasing updates. The
    ``jacobi`` mode instead freezes the iteration-start assignment for all
    groups and accepts or rejects the whole merge; it allows parallel
    sub-solves but stalls noticeably earlier on dense conflict structures.
    Stops early once an iteration changes nothing.

    ``objective_trace[0]`` is the starting objective; one entry is appended
    per completed iteration, and the trace is non-increasing by
    construction. A sub-solver exception aborts the iteration and returns
    the last accepted assignment with ``warning`` set.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if update not in ("jacobi", "gauss-seidel"):
        raise ValueError(f"unknown update mode {update!r}")

    bits = np.ones(qubo.n, dtype=np.int8)
    current = objective(qubo, bits)
    trace = [current]
    subqubo_count = 0
    warning = None
    iterations_run = 0

    for iteration in range(max_iterations):
        changed = False
        try:
            if update == "jacobi":
                subs = extract_subqubos(qubo, bits, k)
                subqubo_count += len(subs)
                candidate = bits.copy()
                for si, sub in enumerate(subs):
                    rng = np.random.default_rng(
                        np.random.SeedSequence((seed, iteration, si)))
                    candidate[sub.indices] = subsolver(sub.problem, rng)
                cand_obj = objective(qubo, candidate)
                if cand_obj <= current and not np.array_equal(candidate, bits):
                    bits, current, changed = candidate, cand_obj, True
            else:
                groups = _impact_groups(qubo, bits, k)
                subqubo_count += len(groups)
                for si, indices in enumerate(groups):
                    sub = _restrict(qubo, bits, indices)
                    rng = np.random.default_rng(
                        np.random.SeedSequence((seed, iteration, si)))
                    candidate = bits.copy()
                    candidate[sub.indices] = subsolver(sub.problem, rng)
                    cand_obj = objective(qubo, candidate)
                    if cand_obj <= current and not np.array_equal(candidate, bits):
                        bits, current, changed = candidate, cand_obj, True
        except Exception as exc:  # sub-solver failure: keep last accepted state
            warning = f"sub-solver failed in iteration {iteration}: {exc}"
            trace.append(current)
            iterations_run = iteration + 1
            break
        iterations_run = iteration + 1
        trace.append(current)
        if not changed:
            break

    return SolveReport(best_assignment=bits, best_objective=current,
                       iterations_run=iterations_run, subqubo_count=subqubo_count,
                       objective_trace=trace, warning=warning)


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling schedule; one sweep = n flip proposals."""

    t_initial: float = 2.0
    t_final: float = 1e-3
    sweeps: int = 300

    def __post_init__(self):
        if self.t_initial <= 0 or self.t_final <= 0:
            raise ValueError("temperatures must be positive")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")

    def temperatures(self) -> np.ndarray:
        if self.sweeps == 1:
            return np.array([self.t_initial])
        ratio = (self.t_final / self.t_initial) ** (1.0 / (self.sweeps - 1))
        return self.t_initial * ratio ** np.arange(self.sweeps)


def solve_annealing(qubo: Qubo, schedule: AnnealSchedule | None = None,
                    seed: int = 0) -> Assignment:
    """Single-flip Metropolis with geometric cooling; returns the best state seen."""
    schedule = schedule or AnnealSchedule()
    rng = np.random.default_rng(seed)
    n = qubo.n
    b = qubo.coupling_matrix()
    bits = np.ones(n, dtype=np.int8)
    local = qubo.linear + b @ bits.astype(float)  # a_i + sum_j b_ij T_j
    current = objective(qubo, bits)
    best_bits, best_obj = bits.copy(), current

    for temperature in schedule.temperatures():
        flips = rng.integers(0, n, size=n)
        draws = rng.random(n)
        for i, u in zip(flips, draws):
            delta = (1.0 - 2.0 * bits[i]) * local[i]
            if delta <= 0.0 or u < np.exp(-delta / temperature):
                step = 1.0 - 2.0 * bits[i]  # +1 if turning on, -1 if off
                bits[i] ^= 1
                local += b[:, i] * step
                current += delta
                if current < best_obj:
                    best_obj = current
                    best_bits = bits.copy()
    return best_bits


def make_annealing_subsolver(schedule: AnnealSchedule | None = None) -> SubSolver:
    def _solve(problem: Qubo, rng: np.random.Generator) -> Assignment:
        return solve_annealing(problem, schedule, seed=int(rng.integers(2 ** 31)))
    return _solve
