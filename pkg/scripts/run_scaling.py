"""Run the bundled consistency sweep and print the per-n summary.

    python3 scripts/run_scaling.py [--jobs N] [--out sweep.csv]
"""
import argparse
import sys

from bellgap.experiments import parse_csv, run_sweep, summarize, to_csv
from bellgap.specio import bundled_spec_path, load_spec, load_sweep


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--spec", default=str(bundled_spec_path("consistency")))
    p.add_argument("--sweep", default=str(bundled_spec_path("consistency_sweep")))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="consistency_sweep.csv")
    args = p.parse_args()
    rows = run_sweep(load_spec(args.spec), load_sweep(args.sweep), jobs=args.jobs)
    summary = summarize(rows)
    text = to_csv(rows, summary)
    with open(args.out, "w") as fh:
        fh.write(text)
    for line in parse_csv(text)[1]:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
