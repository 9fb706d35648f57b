#!/usr/bin/env python3
"""Desk-scale end-to-end run: simulate, reconstruct, evaluate, flatten.

Drives the installed CLI exactly as a user would:
    python scripts/run_desk_scale.py [workdir]
"""

import json
import sys
import tempfile
from pathlib import Path

from qubotrack.cli import main


def run(argv):
    print("$ qubotrack " + " ".join(argv))
    code = main(argv)
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
    workdir.mkdir(parents=True, exist_ok=True)
    run_dir = workdir / "desk_run"
    metrics_dir = workdir / "metrics"

    config = workdir / "config.json"
    config.write_text(json.dumps({"sim": {"mean_multiplicity": 100.0}}, indent=2))

    run(["simulate", "--config", str(config), "--seed", "2024",
         "--out", str(run_dir), "--events", "20"])
    run(["reconstruct", "--config", str(config), "--seed", "2024",
         "--in", str(run_dir), "--solver", "exact", "--jobs", "4"])
    run(["evaluate", "--in", str(run_dir), "--out", str(metrics_dir)])
    run(["plotdata", "--report", str(metrics_dir / "metrics.json"),
         "--out", str(workdir / "plotdata.csv")])

    report = json.loads((metrics_dir / "metrics.json").read_text())
    print("\n--- desk-scale summary ---")
    for key in ("efficiency", "fake_rate", "duplication_rate", "energy_resolution"):
        print(f"{key:20s} {report[key]:.4f}")
    for key, value in report["counts"].items():
        print(f"{key:20s} {value}")
    print(f"\nartifacts in {workdir}")
