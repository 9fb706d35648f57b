"""Detector geometry and the event data model shared by the whole pipeline.

Units: meters for distances, GeV for energies, radians for angles, Tesla for
the dipole field. The tracker is a stack of parallel planes perpendicular to
the beam (z) axis; each plane is a single continuous sensitive area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict


class GeometryError(ValueError):
    """Raised for an invalid geometry configuration."""


N_LAYERS = 4  # quadruplet tracks need one hit per layer


@dataclass(frozen=True)
class GeometryConfig:
    """User-facing geometry knobs with the defaults used throughout."""

    n_layers: int = N_LAYERS
    first_layer_z: float = 1.0        # m, distance of first plane from z=0
    layer_spacing: float = 0.10       # m, pitch between adjacent planes
    layer_half_extent_x: float = 0.27  # m
    layer_half_extent_y: float = 0.01  # m
    hit_resolution: float = 5e-6      # m, in-plane Gaussian smearing sigma
    layer_thickness_x0: float = 0.357e-2  # fraction of a radiation length
    dipole_field: float = 0.95        # T
    dipole_length: float = 1.0        # m, effective field length
    ip_position: tuple[float, float, float] = (0.0, 0.0, 0.0)  # m


@dataclass(frozen=True)
class DetectorGeometry:
    """Immutable geometry derived from a :class:`GeometryConfig`.

    ``layer_z`` is strictly increasing with constant pitch. The dipole is
    modelled downstream as a thin-lens kick located at ``dipole_kick_z``,
    i.e. the centre of a field region starting at the interaction point.
    """

    layer_z: tuple[float, ...]
    layer_half_extent_x: float
    layer_half_extent_y: float
    hit_resolution: float
    layer_thickness_x0: float
    dipole_field: float
    dipole_length: float
    ip_position: tuple[float, float, float]

    @property
    def n_layers(self) -> int:
        return len(self.layer_z)

    @property
    def dipole_kick_z(self) -> float:
        return self.ip_position[2] + 0.5 * self.dipole_length

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorGeometry":
        return cls(
            layer_z=tuple(d["layer_z"]),
            layer_half_extent_x=d["layer_half_extent_x"],
            layer_half_extent_y=d["layer_half_extent_y"],
            hit_resolution=d["hit_resolution"],
            layer_thickness_x0=d["layer_thickness_x0"],
            dipole_field=d["dipole_field"],
            dipole_length=d["dipole_length"],
            ip_position=tuple(d["ip_position"]),
        )


def build_geometry(config: GeometryConfig | None = None) -> DetectorGeometry:
    """Construct and validate the detector geometry.

    Raises :class:`GeometryError` on non-positive sizes, a layer count other
    than four, or non-monotonic layer positions.
    """
    config = config or GeometryConfig()
    if config.n_layers != N_LAYERS:
        raise GeometryError(
            f"pipeline requires exactly {N_LAYERS} layers, got {config.n_layers}"
        )
    if config.layer_spacing <= 0:
        raise GeometryError("layer_spacing must be positive")
    if config.hit_resolution <= 0:
        raise GeometryError("hit_resolution must be positive")
    if config.layer_thickness_x0 < 0:
        raise GeometryError("layer_thickness_x0 must be non-negative")
    if config.dipole_field < 0:
        raise GeometryError("dipole_field must be non-negative")
    if config.dipole_length <= 0:
        raise GeometryError("dipole_length must be positive")
    if config.layer_half_extent_x <= 0 or config.layer_half_extent_y <= 0:
        raise GeometryError("layer half extents must be positive")

    layer_z = tuple(
        config.first_layer_z + k * config.layer_spacing for k in range(config.n_layers)
    )
    if any(b <= a for a, b in zip(layer_z, layer_z[1:])):
        raise GeometryError(f"layer positions not strictly increasing: {layer_z}")

    return DetectorGeometry(
        layer_z=layer_z,
        layer_half_extent_x=config.layer_half_extent_x,
        layer_half_extent_y=config.layer_half_extent_y,
        hit_resolution=config.hit_resolution,
        layer_thickness_x0=config.layer_thickness_x0,
        dipole_field=config.dipole_field,
        dipole_length=config.dipole_length,
        ip_position=tuple(config.ip_position),
    )


@dataclass(frozen=True)
class TruthParticle:
    """Generated particle: energy in GeV, origin in m, unit direction at origin."""

    particle_id: int
    energy: float
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]

    def __post_init__(self):
        if self.energy <= 0:
            raise ValueError(f"particle energy must be positive, got {self.energy}")
        norm = math.sqrt(sum(c * c for c in self.direction))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction not normalized: |d| = {norm!r}")


@dataclass(frozen=True)
class Hit:
    """One measured space point. ``truth_particle_id`` is None for noise."""

    hit_id: int
    layer: int
    position: tuple[float, float, float]
    truth_particle_id: int | None = None


@dataclass(frozen=True)
class Event:
    event_id: int
    xi_label: float
    hits: tuple[Hit, ...]
    particles: tuple[TruthParticle, ...]

    def particle_by_id(self, pid: int) -> TruthParticle:
        for p in self.particles:
            if p.particle_id == pid:
                return p
        raise KeyError(pid)


def validate_event(event: Event, geometry: DetectorGeometry) -> list[str]:
    """Check event-level invariants, returning one diagnostic string each.

    Never raises; an empty list means the event is consistent with the
    geometry: unique hit ids, hits exactly on their layer plane and inside
    the layer extents, and truth links resolving to an existing particle.
    """
    diagnostics: list[str] = []
    pids = {p.particle_id for p in event.particles}
    seen_ids: set[int] = set()
    for hit in event.hits:
        tag = f"event {event.event_id} hit {hit.hit_id}"
        if hit.hit_id in seen_ids:
            diagnostics.append(f"{tag}: duplicate hit id")
        seen_ids.add(hit.hit_id)
        if not 0 <= hit.layer < geometry.n_layers:
            diagnostics.append(f"{tag}: invalid layer {hit.layer}")
            continue
        x, y, z = hit.position
        if z != geometry.layer_z[hit.layer]:
            diagnostics.append(f"{tag}: off-layer hit (z={z!r})")
        if abs(x) > geometry.layer_half_extent_x or abs(y) > geometry.layer_half_extent_y:
            diagnostics.append(f"{tag}: outside layer extents")
        if hit.truth_particle_id is not None and hit.truth_particle_id not in pids:
            diagnostics.append(f"{tag}: dangling truth link ({hit.truth_particle_id})")
    return diagnostics
