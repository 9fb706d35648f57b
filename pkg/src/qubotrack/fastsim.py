"""Toy event generation: positron sampling, dipole kick, straight-line
propagation with multiple scattering, and Gaussian hit smearing.

The generator is pure given (config, geometry, event_id): the per-event RNG
seed is ``rng_seed ^ event_id``, so events can be produced in any order or in
parallel with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DetectorGeometry, Event, Hit, TruthParticle

# momentum kick per field-length, GeV / (T m)
PT_KICK_PER_TESLA_METER = 0.2998

# multiplicity anchors: (intensity label xi, expected positrons per event)
_XI_MULTIPLICITY_ANCHORS = ((3.0, 1e2), (5.0, 1.05e4), (7.0, 7e4))


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class LaserConfig:
    """Laser and constants entering the intensity parameter.

    ``field_strength`` and ``critical_field`` must share one field unit;
    ``frequency`` and ``electron_mass`` are in eV. The default critical
    field is the Schwinger value in V/m. Note that the two-form identity
    checked by :func:`compute_xi` holds only for the natural-unit critical
    field ``electron_mass**2 / sqrt(4 pi alpha)`` (see
    :func:`consistent_critical_field`); the V/m default is kept as the
    conventional reference number.
    """

    field_strength: float            # laser field strength
    frequency: float = 1.55          # eV (800 nm optical laser)
    electron_mass: float = 510998.95  # eV
    fine_structure: float = 7.2973525693e-3
    critical_field: float = 1.32e18  # V/m, Schwinger limit

    def __post_init__(self):
        for name in ("field_strength", "frequency", "electron_mass",
                     "fine_structure", "critical_field"):
            if getattr(self, name) <= 0:
                raise SimulationError(f"{name} must be positive")


def compute_xi(laser: LaserConfig) -> float:
    """Dimensionless laser intensity parameter.

    xi = sqrt(4 pi alpha) * eps_L / (omega_L * m_e).
    """
    e = math.sqrt(4.0 * math.pi * laser.fine_structure)
    return e * laser.field_strength / (laser.frequency * laser.electron_mass)


def compute_xi_via_critical_field(laser: LaserConfig) -> float:
    """Equivalent form xi = m_e * eps_L / (omega_L * eps_cr).

    Agrees with :func:`compute_xi` when ``critical_field`` equals
    :func:`consistent_critical_field` in the unit used for ``field_strength``.
    """
    return (laser.electron_mass * laser.field_strength
            / (laser.frequency * laser.critical_field))


def consistent_critical_field(electron_mass: float = 510998.95,
                              fine_structure: float = 7.2973525693e-3) -> float:
    """Critical field value making the two xi forms identical: m_e^2 / sqrt(4 pi alpha)."""
    return electron_mass ** 2 / math.sqrt(4.0 * math.pi * fine_structure)


def xi_to_multiplicity(xi: float) -> float:
    """Expected positron count for an intensity label, by log-linear interpolation.

    Anchors: (3, 1e2), (5, 1.05e4), (7, 7e4). Valid for 3 <= xi <= 7.
    """
    lo, hi = _XI_MULTIPLICITY_ANCHORS[0][0], _XI_MULTIPLICITY_ANCHORS[-1][0]
    if not lo <= xi <= hi:
        raise SimulationError(f"xi={xi} outside multiplicity lookup range [{lo}, {hi}]")
    for (x1, n1), (x2, n2) in zip(_XI_MULTIPLICITY_ANCHORS, _XI_MULTIPLICITY_ANCHORS[1:]):
        if xi <= x2:
            frac = (xi - x1) / (x2 - x1)
            return math.exp(math.log(n1) + frac * (math.log(n2) - math.log(n1)))
    raise AssertionError("unreachable")


def dipole_deflection(energy: float, field: float, length: float) -> float:
    """Bend angle of the dipole: theta = asin(0.2998 * B * L / E).

    ``energy`` in GeV, ``field`` in T, ``length`` in m. Monotonically
    decreasing in energy. Raises if the transverse kick reaches the particle
    energy (the particle would not exit the field region forward).
    """
    if energy <= 0:
        raise SimulationError(f"energy must be positive, got {energy}")
    kick = PT_KICK_PER_TESLA_METER * field * length
    if kick >= energy:
        raise SimulationError(
            f"energy {energy} GeV below magnetic cutoff {kick} GeV"
        )
    return math.asin(kick / energy)


def scattering_sigma(energy: float, thickness_x0: float) -> float:
    """Highland angular width for one layer crossing.

    sigma = (13.6e-3 / E[GeV]) * sqrt(t) * (1 + 0.038 ln t), t in radiation
    lengths. Returns 0 for t = 0.
    """
    if thickness_x0 < 0:
        raise SimulationError("thickness_x0 must be non-negative")
    if thickness_x0 == 0.0:
        return 0.0
    t = thickness_x0
    return 13.6e-3 / energy * math.sqrt(t) * (1.0 + 0.038 * math.log(t))


def scattering_kick(energy: float, thickness_x0: float,
                    rng: np.random.Generator) -> tuple[float, float]:
    """Independent Gaussian angle kicks (dtheta_x, dtheta_y) for one crossing."""
    sigma = scattering_sigma(energy, thickness_x0)
    if sigma == 0.0:
        return 0.0, 0.0
    kx, ky = rng.normal(0.0, sigma, size=2)
    return float(kx), float(ky)


@dataclass(frozen=True)
class EnergySpectrum:
    """Named parametric positron energy distribution, GeV.

    Kinds: ``gamma`` (shape/scale, truncated to [minimum, maximum] by
    rejection), ``uniform`` (minimum..maximum), ``fixed`` (always
    ``fixed_value``).
    """

    kind: str = "gamma"
    shape: float = 3.0
    scale: float = 1.3
    minimum: float = 0.5
    maximum: float = 14.0
    fixed_value: float = 5.0

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return self.fixed_value
        if self.kind == "uniform":
            return float(rng.uniform(self.minimum, self.maximum))
        if self.kind == "gamma":
            for _ in range(10000):
                e = float(rng.gamma(self.shape, self.scale))
                if self.minimum <= e <= self.maximum:
                    return e
            raise SimulationError("energy spectrum rejection sampling did not converge")
        raise SimulationError(f"unknown energy spectrum kind {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    mean_multiplicity: float = 100.0
    energy_spectrum: EnergySpectrum = field(default_factory=EnergySpectrum)
    ip_smear: tuple[float, float, float] = (5e-6, 5e-6, 24e-6)  # m
    emittance_angle_sigma: float = 1e-4  # rad, Gaussian spread per axis
    rng_seed: int = 1
    poisson_multiplicity: bool = True   # False: exactly round(mean) particles
    scattering: bool = True
    smear_hits: bool = True
    xi_label: float = 0.0

    def __post_init__(self):
        if self.mean_multiplicity < 0:
            raise SimulationError("mean_multiplicity must be non-negative")
        if any(s < 0 for s in self.ip_smear):
            raise SimulationError("ip_smear sigmas must be non-negative")
        if self.emittance_angle_sigma < 0:
            raise SimulationError("emittance_angle_sigma must be non-negative")


def event_rng(sim: SimConfig, event_id: int) -> np.random.Generator:
    return np.random.default_rng(sim.rng_seed ^ event_id)


def generate_event(sim: SimConfig, geometry: DetectorGeometry, event_id: int) -> Event:
    """Generate one event.

    Each positron starts at a smeared IP origin with a small Gaussian angular
    spread, receives the dipole kick in +x at the magnet centre, then
    propagates in straight segments through the layers. Multiple scattering
    tilts the direction at every crossed layer; the recorded hit is the true
    crossing point smeared in-plane by ``hit_resolution``. Crossings outside
    the layer extents produce no hit.
    """
    rng = event_rng(sim, event_id)
    if sim.poisson_multiplicity:
        n_particles = int(rng.poisson(sim.mean_multiplicity))
    else:
        n_particles = int(round(sim.mean_multiplicity))

    particles: list[TruthParticle] = []
    hits: list[Hit] = []
    hit_id = 0
    kick_z = geometry.dipole_kick_z
    for pid in range(n_particles):
        ox = geometry.ip_position[0] + rng.normal(0.0, sim.ip_smear[0])
        oy = geometry.ip_position[1] + rng.normal(0.0, sim.ip_smear[1])
        oz = geometry.ip_position[2] + rng.normal(0.0, sim.ip_smear[2])
        energy = sim.energy_spectrum.sample(rng)
        theta_x0 = rng.normal(0.0, sim.emittance_angle_sigma)
        theta_y0 = rng.normal(0.0, sim.emittance_angle_sigma)

        tx0, ty0 = math.tan(theta_x0), math.tan(theta_y0)
        norm = math.sqrt(tx0 * tx0 + ty0 * ty0 + 1.0)
        particles.append(TruthParticle(
            particle_id=pid,
            energy=energy,
            origin=(ox, oy, oz),
            direction=(tx0 / norm, ty0 / norm, 1.0 / norm),
        ))

        # straight to the magnet centre, then a single thin-lens kick in +x
        x = ox + tx0 * (kick_z - oz)
        y = oy + ty0 * (kick_z - oz)
        theta_x = theta_x0 + dipole_deflection(energy, geometry.dipole_field,
                                               geometry.dipole_length)
        theta_y = theta_y0
        z = kick_z
        for layer, layer_z in enumerate(geometry.layer_z):
            dz = layer_z - z
            x += math.tan(theta_x) * dz
            y += math.tan(theta_y) * dz
            z = layer_z
            crossed = (abs(x) <= geometry.layer_half_extent_x
                       and abs(y) <= geometry.layer_half_extent_y)
            if crossed:
                if sim.smear_hits:
                    mx = x + rng.normal(0.0, geometry.hit_resolution)
                    my = y + rng.normal(0.0, geometry.hit_resolution)
                else:
                    mx, my = x, y
                if abs(mx) <= geometry.layer_half_extent_x and abs(my) <= geometry.layer_half_extent_y:
                    hits.append(Hit(hit_id=hit_id, layer=layer,
                                    position=(mx, my, layer_z),
                                    truth_particle_id=pid))
                    hit_id += 1
                if sim.scattering:
                    kx, ky = scattering_kick(energy, geometry.layer_thickness_x0, rng)
                    theta_x += kx
                    theta_y += ky

    return Event(event_id=event_id, xi_label=sim.xi_label,
                 hits=tuple(hits), particles=tuple(particles))
