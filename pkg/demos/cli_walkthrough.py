"""
Command-line walk-through
=========================

Generate a data set, cluster it from the CSV file, and run a small sweep,
all through the ``owlsc`` command. Outputs go to a temporary directory.
"""
import csv
import os
import subprocess
import sys
import tempfile

tmp = tempfile.mkdtemp(prefix="owlsc-demo-")


def owlsc(*args):
    cmd = [sys.executable, "-m", "owlsc", *args, "-q"]
    print("$ owlsc", " ".join(args), flush=True)
    code = subprocess.run(cmd).returncode
    print("  exit", code)


###############################################################################
# Points are written one per row; labels go to a ``_labels`` file alongside.

data = os.path.join(tmp, "points.csv")
owlsc("generate", "--set", "generator=orthogonal", "--set", "d=4", "--out", data)

###############################################################################
# Cluster the file. ``L`` is required for user data; the diagnostics file
# has one row per regressed point.

labels = os.path.join(tmp, "labels.csv")
owlsc("cluster", "--set", f"data={data}", "--set", f"labels={data[:-4]}_labels.csv",
      "--set", "L=3", "--set", "k=20", "--out", labels)
with open(os.path.join(tmp, "labels_diagnostics.csv")) as fh:
    rows = list(csv.reader(fh))
print(f"  {len(rows) - 1} regressions, clustering error {rows[1][-1]}")

###############################################################################
# A sweep writes one CSV row per (k, method) cell.

sweep = os.path.join(tmp, "sweep.csv")
owlsc("sweep", "--set", "generator=orthogonal", "--set", "d=4", "--set", "k_grid=3,12,60",
      "--replications", "5", "--out", sweep)
with open(sweep) as fh:
    print(fh.read())

###############################################################################
# Property suites print a verdict; a failing suite exits with status 1.

owlsc("validate", "lemma4", "d=2", "delta=0.5", "trials=50")
