"""Log-log slope of L1 against N1 for the constant, ridge-triangle and affine-triangle families."""

import argparse
import csv
import math
from pathlib import Path

from groundstate.cli import sweep_scaling

DEFAULTS = {
    "constant": [4, 8, 16, 32],
    "triangle_example": [16, 32, 64, 128],
    "triangle_affine": [16, 32, 64, 128],
}


def local_slopes(rows):
    return [math.log(b["L1"] / a["L1"]) / math.log(b["N1"] / a["N1"]) for a, b in zip(rows, rows[1:])]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("-o", "--output", type=Path, help="directory for one CSV per family")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--extend", type=int, default=0, help="extra doublings of N1 past the default range")
    args = p.parse_args()
    for family, values in DEFAULTS.items():
        values = values + [values[-1] * 2 ** k for k in range(1, args.extend + 1)]
        rows, slope = sweep_scaling(family, values, workers=args.workers)
        local = " ".join(f"{s:.3f}" for s in local_slopes(rows))
        print(f"{family}: slope {slope:.4f}; local slopes {local}")
        for r in rows:
            print(f"  N1={r['N1']:g}  L1={r['L1']:.6g}  L1_tilde={r['L1_tilde']:.6g}")
        if args.output:
            args.output.mkdir(parents=True, exist_ok=True)
            with open(args.output / f"L1_{family}.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)


if __name__ == "__main__":
    main()
