"""Run the benchmark grid and write records, profiles and plots.

    python scripts/run_grid.py --dims 2,10,100 --jobs 4 --out results

Equivalent to ``fwdgrad grid --svg`` with the same flags; kept as a script so
the experiment can be rerun without installing the console entry point.
"""
import argparse
import sys

from fwdgrad.cli import main

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", default="2,10,100")
    parser.add_argument("--budget", default="10000")
    parser.add_argument("--starts", default="5")
    parser.add_argument("--seed", default="42")
    parser.add_argument("--jobs", default="1")
    parser.add_argument("--out", default="results")
    a = parser.parse_args()
    sys.exit(main([
        "grid", "--dims", a.dims, "--budget", a.budget, "--starts", a.starts, "--seed", a.seed,
        "--jobs", a.jobs, "--out", a.out, "--svg",
    ]))
