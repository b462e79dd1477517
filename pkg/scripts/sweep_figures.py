"""Energy-vs-z sweeps of the generalized N = 4 and N = 5 models as CSV.

Writes one file per model; any plotting tool can draw the real and imaginary
parts against z from the ``re_E*`` / ``im_E*`` columns.
"""

import argparse
from pathlib import Path

from epkit import spectra
from epkit.models import HamiltonianSpec

MODELS = {
    "gen4": {"A": 64.0, "B": -27.0},
    "gen5": {"A": -54.0, "B": 64.0},
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--zmax", type=float, default=100.0)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir", type=Path, default=Path("sweeps"))
    args = p.parse_args()

    args.outdir.mkdir(parents=True, exist_ok=True)
    for model, params in MODELS.items():
        spec = HamiltonianSpec(model, params)
        samples = spectra.sweep(spec, "z", 0.0, args.zmax, args.steps, workers=args.workers)
        path = args.outdir / f"{model}_energies.csv"
        spectra.write_csv(path, samples)
        print(f"{model}: {len(samples)} samples -> {path}")


if __name__ == "__main__":
    main()
