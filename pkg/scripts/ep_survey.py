"""Locate and classify the exceptional points of every model family.

Prints one line per detected point with its location, degenerate energy and
Jordan partition, followed by the relative residual of the constructed
transition matrix at that point.
"""

import argparse

from epkit import ep
from epkit.models import HamiltonianSpec, build
from epkit.numerics import inf_norm

SURVEY = [
    (HamiltonianSpec("gen4", {"A": 64.0, "B": -27.0}), "z", 0.1, 100.0),
    (HamiltonianSpec("gen5", {"A": -54.0, "B": 64.0}), "z", 0.1, 100.0),
    (HamiltonianSpec("bh", {"N": 2}), "z", 0.1, 2.0),
    (HamiltonianSpec("bh", {"N": 3}), "z", 0.1, 2.0),
    (HamiltonianSpec("bh", {"N": 4}), "z", 0.1, 2.0),
    (HamiltonianSpec("bh", {"N": 5}), "z", 0.1, 2.0),
    (HamiltonianSpec("three_guide", {"A": 1.0}), "z", 0.1, 3.0),
    (HamiltonianSpec("two_guide", {"delta": 0.0, "gamma1": 2.0, "gamma2": -2.0}), "g", 0.1, 3.0),
]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=401)
    args = p.parse_args()

    for spec, param, lo, hi in SURVEY:
        recs = ep.detect_ep_numeric(spec, param, lo, hi, samples=args.samples)
        label = f"{spec.family} {spec.params}"
        if not recs:
            print(f"{label}: none in [{lo:g}, {hi:g}]")
        for r in recs:
            H = build(spec.with_params(**{param: r.param_value})).matrix
            d = ep.jordan_decomposition(H)
            rel = d.residual / (1 + inf_norm(H))
            print(f"{label}: {param} = {r.param_value:.12g}  E = {r.energy:.6g}  "
                  f"partition {r.partition}  residual {rel:.1e}")


if __name__ == "__main__":
    main()
