#!/usr/bin/env python3
"""Run a full preset experiment end to end: simulate -> features -> classify.

Example:
    python3 scripts/run_sweep.py --preset wavelength-sweep --out runs/wl --jobs 8
"""

import argparse
import sys

from ridgesense import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--preset", default="wavelength-sweep")
    parser.add_argument("--out", required=True)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument(
        "--velocity", type=float, action="append", help="classify only these velocities"
    )
    args = parser.parse_args()

    sim = ["simulate", "--preset", args.preset, "--out", args.out, "--jobs", str(args.jobs)]
    if args.seed is not None:
        sim += ["--seed", str(args.seed)]
    for stage in (
        sim,
        ["features", "--out", args.out, "--jobs", str(args.jobs)],
        ["classify", "--out", args.out]
        + [a for v in (args.velocity or []) for a in ("--velocity", str(v))],
    ):
        code = cli.main(stage)
        if code != 0:
            print(f"stage {stage[0]} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
