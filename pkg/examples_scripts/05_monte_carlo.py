"""
A small Monte Carlo experiment
==============================

Run the rate-CDF experiment for a handful of seeds and read back the CSV
it writes. The same call with 100 seeds produces the full study.
"""

import csv
import sys
import tempfile
from pathlib import Path

import numpy as np

from dbsnet.config import resolve
from dbsnet.experiments import run_experiment

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
out = Path(tempfile.mkdtemp(prefix="dbsnet-"))
spec = resolve({"experiment": {"name": "rate-cdf", "seeds": seeds, "output_dir": str(out)}})
for path in run_experiment(spec):
    print("wrote", path)

with open(out / "runs.csv", newline="") as fh:
    runs = list(csv.DictReader(fh))
for label in spec.target_cov:
    cell = [r for r in runs if r["cov_label"] == label]
    med = np.median([float(r["median_rate"]) for r in cell])
    dbs = np.mean([int(r["dbs_users"]) for r in cell])
    print(f"{label:>4}: median of per-run median rate {med:.3f}, mean DBS users {dbs:.1f}")
