"""Command line front-end: simulate | reconstruct | evaluate | plotdata.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable or inconsistent input files), 3 invariant violation detected
in otherwise well-formed data.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, SOLVERS
from .fastsim import xi_to_multiplicity
from .geometry import Event, build_geometry
from .io import (DataFormatError, config_hash, read_events, read_json,
                 read_tracks_csv, write_curves_csv, write_doublet_debug_csv,
                 write_hits_csv, write_json, write_particles_csv, write_qubo,
                 write_tracks_csv, write_triplet_debug_csv)
from .metrics import TrackRecord, build_report
from .pipeline import (CalibrationDataError, calibrate, reconstruct_events,
                       simulate_events)
from .preselect import build_doublets, build_triplets
from .qubo import assemble_qubo

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3

DEFAULT_ENERGY_BINS = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0]


class InvariantViolation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the interface reserves 2 for
    # data errors, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "xi", None) is not None:
        config = config.with_xi(args.xi, xi_to_multiplicity(args.xi))
    for attr, key in (("solver", "solver"), ("subqubo_size", "subqubo_size"),
                      ("iterations", "iterations"), ("shots", "shots")):
        value = getattr(args, attr, None)
        if value is not None:
            d = config.to_dict()
            d[key] = value
            config = RunConfig.from_dict(d)
    return config


def cmd_simulate(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        events = simulate_events(config, args.events)
        write_hits_csv(out / "hits.csv", events)
        write_particles_csv(out / "particles.csv", events)
    except OSError as exc:
        print(f"cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_DATA
    write_json(out / "simulate_meta.json", {
        "command": "simulate",
        "config": config.to_dict(),
        "config_hash": config_hash(config.to_dict()),
        "seed": config.seed,
        "n_events": args.events,
        "xi_label": config.sim.xi_label,
        "mean_multiplicity": config.sim.mean_multiplicity,
    })
    print(f"simulated {args.events} events -> {out}")
    return EXIT_OK


def _read_run_dir(run_dir: Path) -> tuple[list[Event], float]:
    hits = run_dir / "hits.csv"
    particles = run_dir / "particles.csv"
    for p in (hits, particles):
        if not p.exists():
            raise DataFormatError(f"missing input file {p}")
    xi_label = 0.0
    meta_path = run_dir / "simulate_meta.json"
    if meta_path.exists():
        xi_label = float(read_json(meta_path).get("xi_label", 0.0))
    return read_events(hits, particles, xi_label=xi_label), xi_label


def cmd_reconstruct(args) -> int:
    config = _load_config(args)
    run_dir = Path(args.input)
    out = Path(args.out) if args.out else run_dir
    events, _ = _read_run_dir(run_dir)
    results, calib_info = reconstruct_events(events, config, jobs=args.jobs)

    out.mkdir(parents=True, exist_ok=True)
    tracks = [t for r in results for t in r.tracks]
    write_tracks_csv(out / "tracks.csv", tracks)
    write_json(out / "solve_report.json", {
        "command": "reconstruct",
        "config": config.to_dict(),
        "config_hash": config_hash(config.to_dict()),
        "seed": config.seed,
        "solver": config.solver,
        "subqubo_size": config.subqubo_size,
        "iterations": config.iterations,
        "shots": config.shots,
        "calibration": calib_info,
        "events": [
            {
                "event_id": r.event_id,
                "n_doublets": r.n_doublets,
                "n_triplets": r.n_triplets,
                "n_tracks": len(r.tracks),
                "solve": None if r.report is None else r.report.to_dict(),
            }
            for r in results
        ],
    })

    if args.dump_qubo or args.debug_dump:
        geometry = build_geometry(config.geometry)
        window, scaling, _ = calibrate(events, config)
        for event in sorted(events, key=lambda e: e.event_id):
            doublets = build_doublets(event.hits, geometry, window)
            triplets = build_triplets(doublets, window)
            if args.debug_dump:
                write_doublet_debug_csv(
                    out / f"doublets_event{event.event_id}.csv", event.event_id, doublets)
                write_triplet_debug_csv(
                    out / f"triplets_event{event.event_id}.csv", event.event_id, triplets)
            if args.dump_qubo and triplets:
                write_qubo(out / f"qubo_event{event.event_id}.txt",
                           assemble_qubo(triplets, scaling))

    print(f"reconstructed {len(events)} events, {len(tracks)} tracks -> {out}")
    return EXIT_OK


def _offset_events(events: list[Event], tracks: list[TrackRecord], offset: int
                   ) -> tuple[list[Event], list[TrackRecord]]:
    if offset == 0:
        return events, tracks
    shifted_events = [
        Event(event_id=e.event_id + offset, xi_label=e.xi_label,
              hits=e.hits, particles=e.particles)
        for e in events
    ]
    shifted_tracks = [
        TrackRecord(event_id=t.event_id + offset, track_id=t.track_id,
                    hit_ids=t.hit_ids, chi2=t.chi2, ndf=t.ndf,
                    energy=t.energy, matched_particle_id=t.matched_particle_id)
        for t in tracks
    ]
    return shifted_events, shifted_tracks


def _check_shared_hits(events: list[Event], tracks: list[TrackRecord]) -> None:
    by_event: dict[int, list[TrackRecord]] = {}
    for t in tracks:
        by_event.setdefault(t.event_id, []).append(t)
    for eid, ts in by_event.items():
        for i, a in enumerate(ts):
            sa = set(a.hit_ids)
            for b in ts[i + 1:]:
                if len(sa & set(b.hit_ids)) >= 2:
                    raise InvariantViolation(
                        f"event {eid}: final tracks {a.track_id} and {b.track_id} "
                        f"share >= 2 hits")


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    all_events: list[Event] = []
    all_tracks: list[TrackRecord] = []
    offset = 0
    for run in args.inputs:
        run_dir = Path(run)
        events, _ = _read_run_dir(run_dir)
        tracks_path = run_dir / "tracks.csv"
        if not tracks_path.exists():
            raise DataFormatError(f"missing input file {tracks_path}")
        tracks = read_tracks_csv(tracks_path)
        known = {e.event_id for e in events}
        missing = sorted({t.event_id for t in tracks} - known)
        if missing:
            raise DataFormatError(
                f"{tracks_path}: tracks reference events missing from truth: {missing}")
        events, tracks = _offset_events(events, tracks, offset)
        offset = max((e.event_id for e in events), default=offset - 1) + 1
        all_events.extend(events)
        all_tracks.extend(tracks)

    edges = args.energy_bins or DEFAULT_ENERGY_BINS
    report = build_report(all_events, all_tracks, edges=edges)
    _check_shared_hits(all_events, all_tracks)
    problems = report.check_invariants()
    if problems:
        raise InvariantViolation("; ".join(problems))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "metrics.json", {
        "command": "evaluate",
        "config_hash": config_hash(config.to_dict()),
        "seed": config.seed,
        "inputs": [str(p) for p in args.inputs],
        **report.to_dict(),
    })
    for name, bins in report.curves.items():
        write_curves_csv(out / f"curve_{name}.csv", bins)
    print(f"evaluated {len(all_events)} events, {len(all_tracks)} tracks -> {out}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    rows: list[tuple] = []
    for path in args.reports:
        payload = read_json(Path(path))
        for metric in ("efficiency", "fake_rate", "duplication_rate",
                       "energy_resolution"):
            value = payload.get(metric)
            if value is not None:
                rows.append((metric, "", "", value, "", ""))
        for label, metrics in payload.get("per_xi_label", {}).items():
            for metric, value in metrics.items():
                if metric in ("events", "tracks") or value is None:
                    continue
                rows.append((metric, label, "", value, "", ""))
        for curve, bins in payload.get("curves", {}).items():
            for b in bins:
                if b["value"] is None:
                    continue
                rows.append((curve, "", f"{b['bin_lo']}:{b['bin_hi']}",
                             b["value"], b["err_lo"], b["err_hi"]))
    for path in args.counts or []:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            for r in reader:
                rows.append(("vqe_counts", "", r["bitstring"], int(r["count"]), "", ""))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "xi_label", "bin", "value", "err_lo", "err_hi"])
        w.writerows(rows)
    print(f"wrote {len(rows)} rows -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qubotrack",
                     description="toy 4-layer tracker reconstruction via "
                                 "binary triplet selection")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON run configuration file")
        p.add_argument("--seed", type=int, help="override the run seed")

    p_sim = sub.add_parser("simulate", help="generate toy events")
    common(p_sim)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--events", type=int, required=True, help="number of events")
    p_sim.add_argument("--xi", type=float,
                       help="intensity-label preset; sets the mean multiplicity")

    p_rec = sub.add_parser("reconstruct", help="reconstruct tracks from a hits file")
    common(p_rec)
    p_rec.add_argument("--in", dest="input", required=True,
                       help="run directory with hits.csv and particles.csv")
    p_rec.add_argument("--out", help="output directory (default: the input directory)")
    p_rec.add_argument("--solver", choices=SOLVERS, help="sub-problem solver")
    p_rec.add_argument("--subqubo-size", dest="subqubo_size", type=int)
    p_rec.add_argument("--iterations", type=int)
    p_rec.add_argument("--shots", type=int)
    p_rec.add_argument("--jobs", type=int, default=1,
                       help="per-event worker processes (default 1)")
    p_rec.add_argument("--dump-qubo", action="store_true",
                       help="also write per-event objective dumps")
    p_rec.add_argument("--debug-dump", action="store_true",
                       help="also write per-event doublet/triplet feature tables")

    p_eval = sub.add_parser("evaluate", help="compute metrics against truth")
    common(p_eval)
    p_eval.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="run directories (hits, particles and tracks files)")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--energy-bins", type=lambda s: [float(x) for x in s.split(",")],
                        help="comma-separated bin edges in GeV")

    p_plot = sub.add_parser("plotdata", help="flatten reports into a tidy table")
    p_plot.add_argument("--report", dest="reports", nargs="+", required=True,
                        help="metrics.json files")
    p_plot.add_argument("--counts", nargs="*",
                        help="optional bitstring histogram CSVs to include")
    p_plot.add_argument("--out", required=True, help="output CSV path")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "simulate": cmd_simulate,
        "reconstruct": cmd_reconstruct,
        "evaluate": cmd_evaluate,
        "plotdata": cmd_plotdata,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CalibrationDataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
