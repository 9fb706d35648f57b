"""Quadruplet building from selected triplets, straight-line fitting,
energy estimation, truth matching and ambiguity resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fastsim import PT_KICK_PER_TESLA_METER
from .geometry import DetectorGeometry, Event, Hit
from .preselect import Triplet
from .qubo import classify_pair


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class TrackCandidate:
    """Exactly four hits, one per layer, built from a chained triplet pair."""

    hits: tuple[Hit, Hit, Hit, Hit]
    source_triplets: tuple[Triplet, Triplet]

    def __post_init__(self):
        layers = tuple(h.layer for h in self.hits)
        if layers != (0, 1, 2, 3):
            raise ValueError(f"candidate must have one hit per layer, got {layers}")

    def hit_ids(self) -> tuple[int, int, int, int]:
        return tuple(h.hit_id for h in self.hits)


@dataclass(frozen=True)
class TrackFit:
    x0: float   # intercept at z=0, m
    y0: float
    tx: float   # slope dx/dz
    ty: float
    chi2: float
    ndf: int    # 2*4 hits - 4 parameters
    energy_estimate: float  # GeV; NaN when the slope cannot be inverted

    @property
    def chi2_ndf(self) -> float:
        return self.chi2 / self.ndf


def triplets_to_candidates(selected: list[Triplet]) -> list[TrackCandidate]:
    """Every chained pair of selected triplets, deduplicated by hit set."""
    out: list[TrackCandidate] = []
    seen: set[tuple[int, ...]] = set()
    for i, t_i in enumerate(selected):
        for t_j in selected[i + 1:]:
            if classify_pair(t_i, t_j) != "chained":
                continue
            first, second = (t_i, t_j) if t_i.layer_span < t_j.layer_span else (t_j, t_i)
            hits = (*first.hits(), second.hits()[2])
            key = tuple(h.hit_id for h in hits)
            if key in seen:
                continue
            seen.add(key)
            out.append(TrackCandidate(hits=hits, source_triplets=(first, second)))
    return out


def _line_fit(z: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """Closed-form least squares of v = intercept + slope*z."""
    n = len(z)
    sz, szz = z.sum(), (z * z).sum()
    sv, svz = v.sum(), (v * z).sum()
    denom = n * szz - sz * sz
    if denom == 0.0:
        raise FitError("degenerate fit: all hits at the same z")
    slope = (n * svz - sz * sv) / denom
    intercept = (sv - slope * sz) / n
    return intercept, slope


def estimate_energy(fit: "TrackFit", geometry: DetectorGeometry) -> float:
    """Invert the dipole model: E = 0.2998 * B * L / sin(atan(tx)).

    Requires a forward-going, +x-deflected slope; raises FitError for
    tracks bending the wrong way or not bending at all.
    """
    theta_x = math.atan(fit.tx)
    if abs(math.sin(theta_x)) < 1e-9:
        raise FitError("track slope too small to invert the dipole deflection")
    if fit.tx < 0:
        raise FitError("track bends away from the spectrometer side")
    kick = PT_KICK_PER_TESLA_METER * geometry.dipole_field * geometry.dipole_length
    return kick / math.sin(theta_x)


def fit_track(candidate: TrackCandidate, geometry: DetectorGeometry) -> TrackFit:
    """Independent weighted least squares in x-z and y-z.

    All hits carry the same in-plane sigma (the detector resolution), so
    the weighted problem reduces to the plain normal equations;
    chi2 = sum((dx^2 + dy^2)) / sigma^2 with 4 degrees of freedom.
    """
    z = np.array([h.position[2] for h in candidate.hits])
    x = np.array([h.position[0] for h in candidate.hits])
    y = np.array([h.position[1] for h in candidate.hits])
    x0, tx = _line_fit(z, x)
    y0, ty = _line_fit(z, y)
    rx = x - (x0 + tx * z)
    ry = y - (y0 + ty * z)
    sigma = geometry.hit_resolution
    chi2 = float(((rx * rx + ry * ry) / (sigma * sigma)).sum())
    fit = TrackFit(x0=x0, y0=y0, tx=tx, ty=ty, chi2=chi2, ndf=4,
                   energy_estimate=math.nan)
    try:
        energy = estimate_energy(fit, geometry)
    except FitError:
        energy = math.nan
    return TrackFit(x0=x0, y0=y0, tx=tx, ty=ty, chi2=chi2, ndf=4,
                    energy_estimate=energy)


def match_candidate(candidate: TrackCandidate, event: Event) -> int | None:
    """Truth particle owning at least 3 of the 4 hits, else None."""
    counts: dict[int, int] = {}
    for h in candidate.hits:
        if h.truth_particle_id is not None:
            counts[h.truth_particle_id] = counts.get(h.truth_particle_id, 0) + 1
    if not counts:
        return None
    pid, best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return pid if best >= 3 else None


def resolve_ambiguities(candidates: list[TrackCandidate],
                        fits: list[TrackFit]) -> list[int]:
    """Indices of candidates surviving shared-hit resolution.

    Repeatedly takes the candidate with the largest total hit overlap among
    those still in a >=2-shared-hit conflict, compares it against each of
    its conflicting partners, and rejects the worse chi2/ndf of every pair
    (ties keep the lower creation index). Terminates when all surviving
    pairs share at most one hit.
    """
    if len(candidates) != len(fits):
        raise ValueError("candidates and fits must align")
    hit_sets = [set(c.hit_ids()) for c in candidates]
    alive = set(range(len(candidates)))

    def shared(i: int, j: int) -> int:
        return len(hit_sets[i] & hit_sets[j])

    while True:
        conflicts = {
            i: [j for j in alive if j != i and shared(i, j) >= 2]
            for i in alive
        }
        in_conflict = [i for i, js in conflicts.items() if js]
        if not in_conflict:
            break
        totals = {
            i: sum(shared(i, j) for j in alive if j != i)
            for i in in_conflict
        }
        pivot = min(in_conflict, key=lambda i: (-totals[i], i))
        pivot_key = (fits[pivot].chi2_ndf, pivot)
        reject_pivot = False
        for partner in conflicts[pivot]:
            if (fits[partner].chi2_ndf, partner) > pivot_key:
                alive.discard(partner)
            else:
                reject_pivot = True
        if reject_pivot:
            alive.discard(pivot)
    return sorted(alive)
