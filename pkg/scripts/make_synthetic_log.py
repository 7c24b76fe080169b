#!/usr/bin/env python3
"""Generate a synthetic recorded log (plus manifest) for exercising `ingest`.

Simulates one scan, wraps the field series in encoder records with a quiet
pre-contact preamble, and writes the versioned log format next to a manifest.
"""

import argparse
from pathlib import Path

import numpy as np

from ridgesense import config as cfgmod
from ridgesense import ingest, magnetics, mechanics, surface


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="directory for log + manifest")
    parser.add_argument("--wavelength-mm", type=float, default=0.42)
    parser.add_argument("--velocity-mm-s", type=float, default=25.0)
    args = parser.parse_args()

    design = next(d for d in cfgmod.default_designs() if d.name == "ridged-flat")
    duration = 1.2
    length = duration * args.velocity_mm_s + design.tip.contact_width_mm + 2.0
    prof = surface.generate_surface(
        surface.SumOfSinusoids(((args.wavelength_mm, 50.0, 0.0),)), length, 200.0
    )
    traj = mechanics.simulate_scan(
        design.tip,
        design.stack,
        prof,
        mechanics.ScanConfig(velocity_mm_s=args.velocity_mm_s, duration_s=duration),
    )
    fs = magnetics.trajectory_to_field(traj, design.magnet, design.layout)

    # quiet preamble so contact detection has a baseline to cross
    n0 = 500
    t0 = np.arange(n0) / fs.rate_hz
    times = np.concatenate([t0, fs.times_s + n0 / fs.rate_hz])
    pad = lambda a: np.concatenate([np.zeros(n0, dtype=np.int64), a])
    full = magnetics.FieldSeries(
        times, pad(fs.bx_lsb), pad(fs.by_lsb), pad(fs.bz_lsb), fs.rate_hz
    )
    records = ingest.synthetic_log_from_field(full, args.velocity_mm_s)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "synthetic.log").write_text(
        ingest.records_to_log(records, comments=["synthetic scan for ingest demo"])
    )
    (out / "manifest.csv").write_text(
        "path,design,material,velocity_mm_s\n"
        f"synthetic.log,ridged-flat,sine-{args.wavelength_mm:g},{args.velocity_mm_s:g}\n"
    )
    print(f"wrote {out / 'synthetic.log'} and {out / 'manifest.csv'}")
    print(f"try: ridgesense ingest --manifest {out / 'manifest.csv'} --out {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
