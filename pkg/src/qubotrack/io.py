"""File formats: hits/particles/tracks CSV, objective dumps, counts and
curve tables, and run metadata JSON.

All floats in CSV files are printed with 9 significant digits; missing
optional fields are empty. The objective dump uses full-precision repr so
it round-trips losslessly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .geometry import Event, Hit, TruthParticle
from .metrics import BinnedValue, TrackRecord
from .preselect import Doublet, Triplet
from .qubo import Qubo

HITS_HEADER = ["event_id", "hit_id", "layer", "x", "y", "z",
               "truth_particle_id", "truth_energy"]
PARTICLES_HEADER = ["event_id", "particle_id", "energy",
                    "ox", "oy", "oz", "dx", "dy", "dz"]
TRACKS_HEADER = ["event_id", "track_id", "hit_ids", "chi2", "ndf",
                 "energy", "matched_particle_id"]


class DataFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.9g}"


def _parse_float(text: str, path: Path, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: bad float in column {column!r}: {text!r}")


def _parse_int(text: str, path: Path, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: bad integer in column {column!r}: {text!r}")


def write_hits_csv(path: Path, events: list[Event]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HITS_HEADER)
        for e in sorted(events, key=lambda e: e.event_id):
            particles = {p.particle_id: p for p in e.particles}
            for h in sorted(e.hits, key=lambda h: h.hit_id):
                pid = h.truth_particle_id
                energy = fmt(particles[pid].energy) if pid in particles else ""
                w.writerow([e.event_id, h.hit_id, h.layer,
                            fmt(h.position[0]), fmt(h.position[1]), fmt(h.position[2]),
                            "" if pid is None else pid, energy])


def write_particles_csv(path: Path, events: list[Event]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(PARTICLES_HEADER)
        for e in sorted(events, key=lambda e: e.event_id):
            for p in sorted(e.particles, key=lambda p: p.particle_id):
                w.writerow([e.event_id, p.particle_id, fmt(p.energy),
                            *(fmt(v) for v in p.origin),
                            *(fmt(v) for v in p.direction)])


def _read_rows(path: Path, header: list[str]) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            found = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected header {header}")
        if found != header:
            raise DataFormatError(f"{path}: bad header {found}, expected {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(dict(zip(header, row), _line=lineno))
        return rows


def read_events(hits_path: Path, particles_path: Path,
                xi_label: float = 0.0) -> list[Event]:
    """Rebuild events from the hits and particles files."""
    hits_path, particles_path = Path(hits_path), Path(particles_path)
    particles_by_event: dict[int, list[TruthParticle]] = {}
    for r in _read_rows(particles_path, PARTICLES_HEADER):
        line = r["_line"]
        eid = _parse_int(r["event_id"], particles_path, line, "event_id")
        # the 9-digit print precision is lossy; restore the unit-norm invariant
        direction = [_parse_float(r[k], particles_path, line, k)
                     for k in ("dx", "dy", "dz")]
        norm = math.sqrt(sum(c * c for c in direction))
        if norm == 0.0:
            raise DataFormatError(f"{particles_path}:{line}: zero direction vector")
        particles_by_event.setdefault(eid, []).append(TruthParticle(
            particle_id=_parse_int(r["particle_id"], particles_path, line, "particle_id"),
            energy=_parse_float(r["energy"], particles_path, line, "energy"),
            origin=tuple(_parse_float(r[k], particles_path, line, k)
                         for k in ("ox", "oy", "oz")),
            direction=tuple(c / norm for c in direction),
        ))
    hits_by_event: dict[int, list[Hit]] = {}
    for r in _read_rows(hits_path, HITS_HEADER):
        line = r["_line"]
        eid = _parse_int(r["event_id"], hits_path, line, "event_id")
        pid = (None if r["truth_particle_id"] == ""
               else _parse_int(r["truth_particle_id"], hits_path, line, "truth_particle_id"))
        hits_by_event.setdefault(eid, []).append(Hit(
            hit_id=_parse_int(r["hit_id"], hits_path, line, "hit_id"),
            layer=_parse_int(r["layer"], hits_path, line, "layer"),
            position=tuple(_parse_float(r[k], hits_path, line, k) for k in ("x", "y", "z")),
            truth_particle_id=pid,
        ))
    event_ids = sorted(set(hits_by_event) | set(particles_by_event))
    return [
        Event(event_id=eid, xi_label=xi_label,
              hits=tuple(hits_by_event.get(eid, [])),
              particles=tuple(particles_by_event.get(eid, [])))
        for eid in event_ids
    ]


def write_tracks_csv(path: Path, tracks: list[TrackRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACKS_HEADER)
        for t in sorted(tracks, key=lambda t: (t.event_id, t.track_id)):
            w.writerow([t.event_id, t.track_id,
                        ";".join(str(h) for h in t.hit_ids),
                        fmt(t.chi2), t.ndf, fmt(t.energy),
                        "" if t.matched_particle_id is None else t.matched_particle_id])


def read_tracks_csv(path: Path) -> list[TrackRecord]:
    path = Path(path)
    out = []
    for r in _read_rows(path, TRACKS_HEADER):
        line = r["_line"]
        hit_ids = tuple(_parse_int(h, path, line, "hit_ids")
                        for h in r["hit_ids"].split(";"))
        if len(hit_ids) != 4:
            raise DataFormatError(f"{path}:{line}: expected 4 hit ids, got {len(hit_ids)}")
        out.append(TrackRecord(
            event_id=_parse_int(r["event_id"], path, line, "event_id"),
            track_id=_parse_int(r["track_id"], path, line, "track_id"),
            hit_ids=hit_ids,
            chi2=_parse_float(r["chi2"], path, line, "chi2"),
            ndf=_parse_int(r["ndf"], path, line, "ndf"),
            energy=_parse_float(r["energy"], path, line, "energy"),
            matched_particle_id=(None if r["matched_particle_id"] == ""
                                 else _parse_int(r["matched_particle_id"], path, line,
                                                 "matched_particle_id")),
        ))
    return out


def write_qubo(path: Path, qubo: Qubo) -> None:
    """Text dump: first line n, then `i a_i` lines, then `i j b_ij` lines
    (nonzero couplings only), with lossless float reprs."""
    with open(path, "w") as f:
        f.write(f"{qubo.n}\n")
        for i, a in enumerate(qubo.linear):
            f.write(f"{i} {float(a)!r}\n")
        for (i, j), b in sorted(qubo.quadratic.items()):
            f.write(f"{i} {j} {float(b)!r}\n")


def read_qubo(path: Path) -> Qubo:
    path = Path(path)
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty objective dump")
    n = int(lines[0])
    linear = np.zeros(n)
    quadratic: dict[tuple[int, int], float] = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) == 2:
            linear[int(parts[0])] = float(parts[1])
        elif len(parts) == 3:
            i, j = int(parts[0]), int(parts[1])
            quadratic[(min(i, j), max(i, j))] = float(parts[2])
        else:
            raise DataFormatError(f"{path}:{lineno}: expected 2 or 3 tokens")
    return Qubo(n=n, linear=linear, quadratic=quadratic)


def write_counts_csv(path: Path, counts: dict[str, int]) -> None:
    """Measurement histogram `bitstring,count`, variable 0 leftmost."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bitstring", "count"])
        for bitstring in sorted(counts, key=lambda b: (-counts[b], b)):
            w.writerow([bitstring, counts[bitstring]])


def write_curves_csv(path: Path, bins: list[BinnedValue]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "value", "err_lo", "err_hi"])
        for b in bins:
            w.writerow([fmt(b.bin_lo), fmt(b.bin_hi),
                        "" if b.value is None else fmt(b.value),
                        "" if b.err_lo is None else fmt(b.err_lo),
                        "" if b.err_hi is None else fmt(b.err_hi)])


def write_doublet_debug_csv(path: Path, event_id: int, doublets: list[Doublet]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["event_id", "id", "layer_inner", "hit_inner", "hit_outer",
                    "theta_xz", "theta_yz", "dx_over_x0", "truth_matched"])
        for i, d in enumerate(doublets):
            matched = (d.hit_inner.truth_particle_id is not None
                       and d.hit_inner.truth_particle_id == d.hit_outer.truth_particle_id)
            w.writerow([event_id, i, d.hit_inner.layer,
                        d.hit_inner.hit_id, d.hit_outer.hit_id,
                        fmt(d.theta_xz), fmt(d.theta_yz), fmt(d.dx_over_x0),
                        int(matched)])


def write_triplet_debug_csv(path: Path, event_id: int, triplets: list[Triplet]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["event_id", "id", "span_first", "span_last",
                    "hit_ids", "delta_theta", "truth_matched"])
        for i, t in enumerate(triplets):
            w.writerow([event_id, i, t.layer_span[0], t.layer_span[1],
                        ";".join(str(h) for h in t.hit_ids()),
                        fmt(t.delta_theta),
                        int(t.truth_particle_id() is not None)])


def config_hash(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: Path) -> dict:
    with open(path) as f:
        return json.load(f)
