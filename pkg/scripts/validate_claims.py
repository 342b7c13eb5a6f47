"""Check every theoretical claim and print a one-line verdict per claim.

Exits 1 if any claim fails. ``--out`` also writes the JSON report.
"""
import argparse
import sys
from pathlib import Path

from fwdgrad.theory import ValidationConfig, reports_to_json, run_all_validations

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--samples", type=int, default=100_000)
    parser.add_argument("--out", default=None)
    a = parser.parse_args()
    reports = run_all_validations(ValidationConfig(seed=a.seed, mc_samples=a.samples))
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.claim_id}: observed {r.observed:.6g}, predicted {r.predicted:.6g}")
    if a.out:
        Path(a.out).write_text(reports_to_json(reports))
    sys.exit(0 if all(r.passed for r in reports) else 1)
