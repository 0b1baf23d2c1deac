"""
Driving runs from the command line
==================================

``python -m gasil`` exposes train, sweep, plot, snapshot and eval. This
script calls the same entry point in-process with a tiny budget.
"""

import os
import tempfile

from gasil.cli import main

out = tempfile.mkdtemp(prefix="gasil_cli_")
run = os.path.join(out, "run")
tiny = ["--total-steps", "4096", "--eval-interval", "1", "--eval-episodes", "2"]

print("train ->", main(["train", "--output-dir", run, "--seed", "0", *tiny]))
print("eval ->", main(["eval", run, "--episodes", "3"]))
print("plot ->", main(["plot", run, "--output", os.path.join(out, "curves.svg")]))
print("snapshot ->", main(["snapshot", run, "--output", os.path.join(out, "snapshot.svg")]))
print("sweep ->", main(["sweep", "--axis", "alpha", "--values", "0.0,0.2", "--seeds", "0",
                        "--output-dir", os.path.join(out, "sweep"), *tiny]))
with open(os.path.join(out, "sweep", "summary.csv")) as f:
    print(f.read())

# a bad value is reported with the field name and exit code 2
print("bad config ->", main(["train", "--output-dir", run, "--delay", "0"]))
