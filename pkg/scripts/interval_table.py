"""Print the spectral-class interval table of the generalized models."""

import argparse

from epkit import spectra
from epkit.models import HamiltonianSpec

MODELS = {
    "gen4": {"A": 64.0, "B": -27.0},
    "gen5": {"A": -54.0, "B": 64.0},
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--zmin", type=float, default=1e-3)
    p.add_argument("--zmax", type=float, default=200.0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--xtol", type=float, default=1e-9)
    args = p.parse_args()

    for model, params in MODELS.items():
        spec = HamiltonianSpec(model, params)
        samples = spectra.sweep(spec, "z", args.zmin, args.zmax, args.steps)
        trans = spectra.find_transitions(spec, "z", samples, xtol=args.xtol)
        print(f"{model} (A={params['A']:g}, B={params['B']:g})")
        for row in spectra.interval_table(trans, samples):
            print(f"  z in ({row['from']:.9g}, {row['to']:.9g}): {row['class']}")
        for t in trans:
            print(f"  transition at z = {t.param_value:.12g}")


if __name__ == "__main__":
    main()
