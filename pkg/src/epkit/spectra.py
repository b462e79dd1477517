"""Closed-form spectra of the N = 4 / N = 5 families, secular-equation checks,
and real/imaginary/complex classification over parameter sweeps."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numerics
from .models import HamiltonianSpec, build, exact_matrix

CLASS_TOL = 1e-9


@dataclass(frozen=True)
class Classification:
    n_real: int = 0
    n_imaginary: int = 0
    n_complex: int = 0
    n_zero: int = 0

    def as_tuple(self):
        return (self.n_real, self.n_imaginary, self.n_complex, self.n_zero)

    def __str__(self):
        parts = [f"{n} {name}" for n, name in zip(self.as_tuple(), ("real", "imag", "complex", "zero")) if n]
        return "{" + ", ".join(parts) + "}"


def classify(energies, tol: float = CLASS_TOL) -> Classification:
    """Count zero / real / purely imaginary / complex values.

    Thresholds are ``tol * max(1, max|E|)``; zero is tested first.
    """
    E = np.asarray(energies, dtype=complex)
    scale = tol * max(1.0, float(np.abs(E).max()) if E.size else 1.0)
    counts = [0, 0, 0, 0]
    for e in E:
        if abs(e) <= scale:
            counts[3] += 1
        elif abs(e.imag) <= scale:
            counts[0] += 1
        elif abs(e.real) <= scale:
            counts[1] += 1
        else:
            counts[2] += 1
    return Classification(*counts)


@dataclass(frozen=True, eq=False)
class SpectrumSample:
    param_value: float
    energies: np.ndarray
    classification: Classification


def pm_sqrt(x: complex) -> tuple[complex, complex]:
    r = complex(np.sqrt(complex(x)))
    return r, -r


def closed_roots_gen4(A: float, B: float, z: float):
    """Roots ``x_+-`` of the N = 4 secular equation and the energies ``+-sqrt(x_+-)``."""
    disc = -64 * B * z + 4 * B * A + 64 * z * z + 16 * z * A + A * A
    root = np.sqrt(complex(disc))
    base = B - 5 * z + A / 2
    xp, xm = base + root / 2, base - root / 2
    return (xp, xm), np.array([*pm_sqrt(xp), *pm_sqrt(xm)])


def closed_roots_gen5(A: float, B: float, z: float):
    """Roots ``x_+-`` of the N = 5 secular factor and the five energies (incl. E = 0)."""
    disc = -36 * z * B + 36 * z * z + 12 * z * A + A * A
    root = np.sqrt(complex(disc))
    base = B - 10 * z + A
    xp, xm = base + root, base - root
    return (xp, xm), np.array([0j, *pm_sqrt(xp), *pm_sqrt(xm)])


def secular_coefficients(model: str, A, B, z) -> list:
    """Ascending coefficients in ``x = E^2`` of the quadratic secular factor.

    Works with floats or exact rationals.  For gen5 the full polynomial in E
    carries one further factor E (the fixed level E = 0).
    """
    if model == "gen4":
        return [9 * z * z + 6 * B * z - 9 * z * A + B * B, 10 * z - 2 * B - A, 1]
    if model == "gen5":
        return [2 * A * B - 32 * z * A + 64 * z * z + 16 * z * B + B * B, 20 * z - 2 * B - 2 * A, 1]
    raise ValueError(f"secular form only defined for gen4/gen5, got {model!r}")


def secular_polynomial_in_energy(model: str, A, B, z) -> list:
    """Expand the secular form into ascending coefficients of ``det(E - H)``."""
    q0, q1, q2 = secular_coefficients(model, A, B, z)
    even = [q0, 0, q1, 0, q2]
    return even if model == "gen4" else [0, *even]


def secular_check(model: str, A, B, z, exact: bool = False, perturb: float = 0.0) -> float:
    """Max coefficient discrepancy between the secular form and ``char_poly``.

    ``perturb`` is added to the constant secular coefficient (sensitivity
    probe).  In exact mode the parameters are converted to rationals and the
    residual is computed symbolically (returned as float).
    """
    spec = HamiltonianSpec(model, {"A": A, "B": B, "z": z})
    if exact:
        import sympy as sp

        rat = {k: sp.nsimplify(v, rational=True) for k, v in spec.params.items()}
        cp = numerics.char_poly(exact_matrix(HamiltonianSpec(model, rat)), exact=True).coefficients
        ref = secular_polynomial_in_energy(model, rat["A"], rat["B"], rat["z"])
        ref[0] += sp.nsimplify(perturb, rational=True)
        return float(max(abs(sp.simplify(a - b)) for a, b in zip(cp, ref)))
    cp = numerics.char_poly(build(spec).matrix).coefficients
    ref = np.array(secular_polynomial_in_energy(model, float(A), float(B), float(z)), dtype=complex)
    ref[0] += perturb
    return float(np.max(np.abs(cp - ref)))


def multiset_distance(a, b) -> float:
    """Largest pairwise error under the optimal one-to-one matching."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("multisets differ in size")
    D = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(D)
    return float(D[r, c].max()) if a.size else 0.0


def sample(spec: HamiltonianSpec, param: str, value: float, tol: float = CLASS_TOL) -> SpectrumSample:
    H = build(spec.with_params(**{param: value})).matrix
    E = numerics.eigenvalues(H)
    return SpectrumSample(float(value), E, classify(E, tol))


def sweep(
    spec: HamiltonianSpec,
    param: str,
    lo: float,
    hi: float,
    steps: int,
    tol: float = CLASS_TOL,
    workers: int = 1,
) -> list[SpectrumSample]:
    """Spectra at ``steps`` evenly spaced values of ``param`` in ``[lo, hi]``.

    Samples are independent (no branch tracking across samples); energies in
    each sample are sorted by (Re, Im).
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not hi > lo:
        raise ValueError(f"invalid range {lo}:{hi}")
    grid = np.linspace(lo, hi, steps)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda v: sample(spec, param, v, tol), grid))
    return [sample(spec, param, v, tol) for v in grid]


@dataclass(frozen=True)
class Transition:
    param_value: float
    before: Classification
    after: Classification


def find_transitions(
    spec: HamiltonianSpec,
    param: str,
    samples: list[SpectrumSample],
    xtol: float = 1e-6,
    tol: float = CLASS_TOL,
) -> list[Transition]:
    """Parameter values where the classification changes, bisected to ``xtol``."""
    out = []
    for left, right in zip(samples, samples[1:]):
        if left.classification == right.classification:
            continue
        lo, hi = left.param_value, right.param_value
        c_lo = left.classification
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if sample(spec, param, mid, tol).classification == c_lo:
                lo = mid
            else:
                hi = mid
        out.append(Transition(0.5 * (lo + hi), left.classification, right.classification))
    return out


def interval_table(transitions: list[Transition], samples: list[SpectrumSample]) -> list[dict]:
    """Collapse a sweep into maximal intervals of constant classification."""
    rows = []
    start = samples[0].param_value
    current = samples[0].classification
    for t in transitions:
        rows.append({"from": start, "to": t.param_value, "class": current})
        start, current = t.param_value, t.after
    rows.append({"from": start, "to": samples[-1].param_value, "class": current})
    return rows


def csv_header(n: int) -> list[str]:
    return (["z"] + [f"re_E{k}" for k in range(1, n + 1)] + [f"im_E{k}" for k in range(1, n + 1)]
            + ["class_real", "class_imag", "class_complex", "class_zero"])


def write_csv(path, samples: list[SpectrumSample]) -> None:
    """Sweep CSV: parameter, real parts, imaginary parts, class counts."""
    n = samples[0].energies.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n))
        for s in samples:
            c = s.classification
            w.writerow([repr(s.param_value), *(repr(float(e.real)) for e in s.energies),
                        *(repr(float(e.imag)) for e in s.energies),
                        c.n_real, c.n_imaginary, c.n_complex, c.n_zero])


