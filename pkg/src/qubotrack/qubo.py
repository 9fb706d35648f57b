"""Objective assembly for triplet selection and its spin-Hamiltonian form.

One binary variable per triplet: 1 keeps the triplet, 0 rejects it. The
objective is

    O(T) = sum_{i<j} b_ij T_i T_j + sum_i a_i T_i

with a_i the triplet quality (its delta_theta mapped onto [-1, 1], smaller
is better) and b_ij the pair compatibility:

  * chained     -> b in [-1, -0.9]: the two triplets share one doublet and
                   together form a 4-hit candidate; the reward shrinks with
                   the spread of the three doublet angles,
  * conflict    -> b = 1: the triplets share at least one hit but do not
                   chain,
  * disjoint    -> b = 0 (not stored).

Spin form: substituting T_i = (1 + Z_i)/2 turns O into a diagonal
Hamiltonian whose ground state encodes the optimal selection. With the
computational-basis convention Z|0> = +|0>, a measured bit m corresponds to
T = 1 - m; solvers invert at readout so that reported bitstrings use
bit=1 <=> triplet selected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .preselect import Triplet

# selection bit vector, dtype int8, values {0, 1}
Assignment = np.ndarray


@dataclass(frozen=True)
class QuboScaling:
    """Affine-scaling constants for the objective coefficients.

    ``theta_scale`` maps delta_theta onto the linear range (default: the
    triplet pre-selection cap, so surviving triplets populate [-1, 1]).
    ``s_max`` caps the angle-spread term of chained pairs; it is normally
    calibrated as the 99th percentile over truth quadruplets
    (:func:`calibrate_s_max`), with 1e-3 as an uncalibrated fallback.
    """

    theta_scale: float = 1e-3
    s_max: float = 1e-3

    def __post_init__(self):
        if self.theta_scale <= 0 or self.s_max <= 0:
            raise ValueError("scaling constants must be positive")


@dataclass
class Qubo:
    n: int
    linear: np.ndarray                      # shape (n,)
    quadratic: dict[tuple[int, int], float]  # keys (i, j) with i < j, no zeros
    triplet_refs: list[Triplet] | None = None
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float)
        if self.linear.shape != (self.n,):
            raise ValueError(f"linear shape {self.linear.shape} != ({self.n},)")
        for (i, j) in self.quadratic:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad coefficient index pair ({i}, {j})")

    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric coefficient matrix with zero diagonal (cached)."""
        if self._dense is None:
            m = np.zeros((self.n, self.n))
            for (i, j), b in self.quadratic.items():
                m[i, j] = b
                m[j, i] = b
            self._dense = m
        return self._dense


def linear_coefficient(triplet: Triplet, theta_scale: float) -> float:
    """Map delta_theta affinely onto [-1, 1]: 0 -> -1 (best), theta_scale -> +1."""
    if theta_scale <= 0:
        raise ValueError("theta_scale must be positive")
    return float(np.clip(2.0 * triplet.delta_theta / theta_scale - 1.0, -1.0, 1.0))


def classify_pair(t_i: Triplet, t_j: Triplet) -> str:
    """Relation of two triplets: 'chained', 'conflict' or 'disjoint'.

    Chained means they share exactly one doublet and span complementary
    layer ranges, so their union is a 4-hit candidate with one hit per
    layer. Sharing any hit without chaining is a conflict.
    """
    if t_i.layer_span != t_j.layer_span:
        first, second = (t_i, t_j) if t_i.layer_span < t_j.layer_span else (t_j, t_i)
        d_shared = first.doublet_second
        d_other = second.doublet_first
        if (d_shared.hit_inner.hit_id == d_other.hit_inner.hit_id
                and d_shared.hit_outer.hit_id == d_other.hit_outer.hit_id):
            return "chained"
    shared = set(t_i.hit_ids()) & set(t_j.hit_ids())
    return "conflict" if shared else "disjoint"


def chained_angle_spread(t_i: Triplet, t_j: Triplet) -> float:
    """Norm of the angle standard deviations over the three doublets of a chain.

    s = sqrt(std(theta_xz)^2 + std(theta_yz)^2), population convention,
    taken over the three distinct doublets of the chained pair.
    """
    first, second = (t_i, t_j) if t_i.layer_span < t_j.layer_span else (t_j, t_i)
    ds = (first.doublet_first, first.doublet_second, second.doublet_second)
    txz = np.array([d.theta_xz for d in ds])
    tyz = np.array([d.theta_yz for d in ds])
    return float(np.sqrt(txz.var() + tyz.var()))


def quadratic_coefficient(t_i: Triplet, t_j: Triplet, scaling: QuboScaling) -> float:
    """Pair coefficient b_ij; see module docstring for the three cases."""
    relation = classify_pair(t_i, t_j)
    if relation == "disjoint":
        return 0.0
    if relation == "conflict":
        return 1.0
    s = chained_angle_spread(t_i, t_j)
    return -1.0 + 0.1 * float(np.clip(s / scaling.s_max, 0.0, 1.0))


def truth_chain_spreads(triplets: list[Triplet]) -> list[float]:
    """Angle spreads of all truth-chained triplet pairs of one event.

    Triplet lists from different events must not be pooled here: particle
    and hit ids restart per event.
    """
    by_pid: dict[int, list[Triplet]] = {}
    for t in triplets:
        pid = t.truth_particle_id()
        if pid is not None:
            by_pid.setdefault(pid, []).append(t)
    spreads = []
    for ts in by_pid.values():
        for i, t_i in enumerate(ts):
            for t_j in ts[i + 1:]:
                if classify_pair(t_i, t_j) == "chained":
                    spreads.append(chained_angle_spread(t_i, t_j))
    return spreads


def calibrate_s_max(spreads: list[float], percentile: float = 99.0) -> float | None:
    """99th percentile of truth-quadruplet angle spreads, or None if empty."""
    if not spreads:
        return None
    return float(np.percentile(spreads, percentile))


def assemble_qubo(triplets: list[Triplet],
                  scaling: QuboScaling | None = None) -> Qubo:
    """Build the selection objective from a nonempty triplet list.

    Only connected pairs are enumerated (via a hit-to-triplet index), so
    disjoint pairs never cost time or storage.
    """
    if not triplets:
        raise ValueError("cannot assemble a QUBO from an empty triplet list")
    scaling = scaling or QuboScaling()

    linear = np.array([linear_coefficient(t, scaling.theta_scale) for t in triplets])

    by_hit: dict[int, list[int]] = {}
    for idx, t in enumerate(triplets):
        for hid in t.hit_ids():
            by_hit.setdefault(hid, []).append(idx)
    pairs: set[tuple[int, int]] = set()
    for indices in by_hit.values():
        for a, i in enumerate(indices):
            for j in indices[a + 1:]:
                pairs.add((i, j) if i < j else (j, i))

    quadratic: dict[tuple[int, int], float] = {}
    for i, j in sorted(pairs):
        b = quadratic_coefficient(triplets[i], triplets[j], scaling)
        if b != 0.0:
            quadratic[(i, j)] = b

    return Qubo(n=len(triplets), linear=linear, quadratic=quadratic,
                triplet_refs=list(triplets))


def objective(qubo: Qubo, bits: Assignment) -> float:
    """O(T) = sum_{i<j} b_ij T_i T_j + sum_i a_i T_i."""
    t = np.asarray(bits, dtype=float)
    if t.shape != (qubo.n,):
        raise ValueError(f"assignment length {t.shape} does not match n={qubo.n}")
    b = qubo.coupling_matrix()
    return float(qubo.linear @ t + 0.5 * t @ (b @ t))


def impact(qubo: Qubo, bits: Assignment, i: int) -> float:
    """Objective change when flipping variable i: O(flip) - O(current)."""
    if not 0 <= i < qubo.n:
        raise IndexError(i)
    t = np.asarray(bits, dtype=float)
    b = qubo.coupling_matrix()
    return float((1.0 - 2.0 * t[i]) * (qubo.linear[i] + b[i] @ t))


def impacts(qubo: Qubo, bits: Assignment) -> np.ndarray:
    """Vector of flip impacts for all variables at once."""
    t = np.asarray(bits, dtype=float)
    b = qubo.coupling_matrix()
    return (1.0 - 2.0 * t) * (qubo.linear + b @ t)


@dataclass
class IsingHamiltonian:
    """Diagonal spin Hamiltonian equivalent to a Qubo under T = (1 + Z)/2.

    E(z) = constant + sum_i field_i z_i + sum_{i<j} coupling_ij z_i z_j for
    spins z in {+1, -1}; z = +1 corresponds to T = 1 (selected).
    """

    constant: float
    field: np.ndarray
    coupling: dict[tuple[int, int], float]

    @property
    def n(self) -> int:
        return len(self.field)

    def energy_of_spins(self, spins: np.ndarray) -> float:
        z = np.asarray(spins, dtype=float)
        e = self.constant + float(self.field @ z)
        for (i, j), cij in self.coupling.items():
            e += cij * z[i] * z[j]
        return e

    def energy_of_bits(self, bits: Assignment) -> float:
        """Energy of a selection bit vector (bit=1 <=> T=1 <=> z=+1)."""
        return self.energy_of_spins(2 * np.asarray(bits, dtype=float) - 1.0)

    def measured_energy_table(self) -> np.ndarray:
        """Energies of all 2^n computational basis states.

        Index s uses qubit 0 as the most significant bit. Measured bit m
        maps to spin z = 1 - 2m (Z|0> = +|0>), i.e. m = 0 means selected.
        """
        n = self.n
        s = np.arange(2 ** n)
        z = np.empty((n, 2 ** n))
        for q in range(n):
            z[q] = 1.0 - 2.0 * ((s >> (n - 1 - q)) & 1)
        e = np.full(2 ** n, self.constant)
        e += self.field @ z
        for (i, j), cij in self.coupling.items():
            e += cij * z[i] * z[j]
        return e


def to_ising(qubo: Qubo) -> IsingHamiltonian:
    """Substitute T_i = (1 + Z_i)/2 and collect constant, field and coupling."""
    constant = float(qubo.linear.sum() / 2.0)
    h = qubo.linear / 2.0
    coupling: dict[tuple[int, int], float] = {}
    for (i, j), b in qubo.quadratic.items():
        constant += b / 4.0
        h[i] += b / 4.0
        h[j] += b / 4.0
        coupling[(i, j)] = b / 4.0
    return IsingHamiltonian(constant=constant, field=h, coupling=coupling)
