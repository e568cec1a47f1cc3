"""Sweep the line geometry over angles and write (theta, beta, C, C*, bounds) as CSV."""
import argparse
import csv
import sys

import numpy as np

from bellgap.experiments import geometry_report


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n-angles", type=int, default=18)
    p.add_argument("--weight-radius", type=float, default=1.0)
    p.add_argument("--out", default="geometry.csv")
    args = p.parse_args()
    thetas = np.linspace(0, 85, args.n_angles)
    rows = geometry_report(thetas, weight_radius=args.weight_radius)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    bad = [r["theta"] for r in rows if not r["ok"]]
    print(f"wrote {len(rows)} angles to {args.out}; flagged: {bad or 'none'}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
