import csv
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from epkit import spectra
from epkit.models import HamiltonianSpec, bose_hubbard_matrix, build
from epkit.numerics import eigenvalues
from epkit.spectra import (Classification, classify, closed_roots_gen4, closed_roots_gen5,
                           multiset_distance, secular_check, sweep)

coef = st.floats(-100, 100, allow_nan=False)
zs = st.floats(0, 100, allow_nan=False)


def _scaled_distance(model, A, B, z, E):
    H = build(HamiltonianSpec(model, {"A": A, "B": B, "z": z})).matrix
    num = eigenvalues(H)
    return multiset_distance(E, num) / max(1.0, np.abs(H).sum(axis=1).max())


@given(coef, coef, zs)
def test_closed_roots_gen4_match_eigenvalues(A, B, z):
    _, E = closed_roots_gen4(A, B, z)
    # a double root of the quadratic turns into a defective pair: sqrt(eps) accuracy there
    x, _ = closed_roots_gen4(A, B, z)
    tol = 1e-8 if abs(x[0] - x[1]) > 1e-3 * max(1, abs(x[0])) and min(map(abs, x)) > 1e-3 else 1e-5
    assert _scaled_distance("gen4", A, B, z, E) <= tol


@given(coef, coef, zs)
def test_closed_roots_gen5_match_eigenvalues(A, B, z):
    x, E = closed_roots_gen5(A, B, z)
    tol = 1e-8 if abs(x[0] - x[1]) > 1e-3 * max(1, abs(x[0])) and min(map(abs, x)) > 1e-3 else 1e-5
    assert _scaled_distance("gen5", A, B, z, E) <= tol


def test_closed_roots_examples():
    x, E = closed_roots_gen4(4, 3, 0)
    assert sorted(np.real(x)) == [1, 9]
    assert multiset_distance(E, [3, -3, 1, -1]) < 1e-14
    x, E = closed_roots_gen4(64, -27, 1)
    assert np.allclose(x, 0) and np.allclose(E, 0)
    x, _ = closed_roots_gen4(64, -27, 81)
    assert multiset_distance(x, [0, -800]) < 1e-9
    _, E = closed_roots_gen5(6, 4, 0)
    assert multiset_distance(E, [0, 4, -4, 2, -2]) < 1e-14
    x, E = closed_roots_gen5(-54, 64, 81)
    assert np.allclose(x, -800)
    assert multiset_distance(E, [0] + [1j * math.sqrt(800), -1j * math.sqrt(800)] * 2) < 1e-9
    _, E = closed_roots_gen5(-54, 64, 1)
    assert np.allclose(E, 0)


@given(st.integers(2, 5), st.floats(0, 1, allow_nan=False))
def test_bose_hubbard_closed_form(N, z):
    # energies (2k - N - 1) sqrt(1 - z), the N = 4 / N = 5 members of the gen families
    k = np.arange(1, N + 1)
    ref = (2 * k - N - 1) * math.sqrt(1 - z)
    # near z = 1 the roots are ill-conditioned: error ~ eps / (1 - z)^((N - 1)/2),
    # floored by the eps^(1/N) noise of an exact N-fold root
    eta = max(1 - z, 1e-30)
    tol = 1e-9 + min(100 * np.finfo(float).eps * eta ** (-(N - 1) / 2), N * np.finfo(float).eps ** (1 / N))
    assert multiset_distance(eigenvalues(bose_hubbard_matrix(N, math.sqrt(z))), ref) <= tol


def test_secular_equation_symbolic():
    # expand det(E - H) symbolically and compare with the closed-form quadratic in x = E^2
    # positive symbols keep sqrt(A)**2 == A; the polynomial identity then extends to all A, B
    A, B, z = sp.symbols("A B z", positive=True)
    E = sp.Symbol("E")
    from epkit.models import exact_matrix

    for model in ("gen4", "gen5"):
        H = exact_matrix(HamiltonianSpec(model, {"A": A, "B": B, "z": z}))
        det = sp.expand((E * sp.eye(H.shape[0]) - H).det(method="berkowitz"))
        q0, q1, q2 = spectra.secular_coefficients(model, A, B, z)
        ref = sp.expand((q2 * E**4 + q1 * E**2 + q0) * (E if model == "gen5" else 1))
        assert sp.expand(det - ref) == 0


@pytest.mark.parametrize("model,A,B,z", [("gen4", 4, 3, 0.5), ("gen5", 6, 4, 0.25),
                                         ("gen4", 64, -27, 3.0), ("gen5", -54, 64, 7.0)])
def test_secular_check(model, A, B, z):
    assert secular_check(model, A, B, z) <= 1e-10
    assert secular_check(model, A, B, z, exact=True) == 0


def test_secular_check_detects_perturbation():
    assert secular_check("gen4", 4, 3, 0.5, perturb=1e-3) == pytest.approx(1e-3, rel=1e-6)


def test_secular_unknown_model():
    with pytest.raises(ValueError):
        spectra.secular_coefficients("bose_hubbard", 1, 1, 1)


def test_classify_counts_and_zero_first():
    c = classify([0, 1e-12, 2, -3j, 1 + 1j])
    assert c == Classification(n_real=1, n_imaginary=1, n_complex=1, n_zero=2)
    assert str(c) == "{1 real, 1 imag, 1 complex, 2 zero}"


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), max_size=8))
def test_classification_sums_to_dimension(E):
    assert sum(classify(E).as_tuple()) == len(E)


@pytest.mark.parametrize("z,want", [(0.5, (0, 0, 4, 0)), (4.0, (2, 2, 0, 0)), (100.0, (0, 4, 0, 0))])
def test_gen4_classification(z, want):
    s = spectra.sample(HamiltonianSpec("gen4", {"A": 64, "B": -27}), "z", z)
    assert s.classification.as_tuple() == want


def test_gen4_intermediate_roots():
    x, _ = closed_roots_gen4(64, -27, 4)
    assert multiset_distance(x, [33, -63]) < 1e-12


def test_gen5_classification_small_z():
    s = spectra.sample(HamiltonianSpec("gen5", {"A": -54, "B": 64}), "z", 0.5)
    assert s.classification.as_tuple() == (2, 2, 0, 1)


@given(st.sampled_from(["gen4", "gen5", "three_guide", "bh"]), st.floats(0.01, 100))
def test_spectrum_symmetric_under_negation(model, z):
    params = {"gen4": {"A": 64, "B": -27}, "gen5": {"A": -54, "B": 64},
              "three_guide": {"A": 1}, "bh": {"N": 4}}[model]
    E = spectra.sample(HamiltonianSpec(model, params), "z", z).energies
    tol = 1e-9 * max(1, np.abs(E).max())
    # the coalescence points only resolve to eps^(1/K)
    if min(abs(z - 1), abs(z - 81), abs(z - 2)) < 1e-3:
        tol = 1e-3
    assert multiset_distance(E, -E) <= tol


def test_gen5_has_zero_level(rng):
    for z in rng.uniform(0.01, 100, 20):
        E = spectra.sample(HamiltonianSpec("gen5", {"A": -54, "B": 64}), "z", z).energies
        assert np.abs(E).min() < 1e-9


def test_sweep_sorted_and_sized():
    samples = sweep(HamiltonianSpec("gen4", {"A": 64, "B": -27}), "z", 0, 10, 7)
    assert [s.param_value for s in samples] == list(np.linspace(0, 10, 7))
    for s in samples:
        keys = [(round(e.real, 12), round(e.imag, 12)) for e in s.energies]
        assert keys == sorted(keys)


def test_sweep_parallel_is_deterministic():
    spec = HamiltonianSpec("gen5", {"A": -54, "B": 64})
    a = sweep(spec, "z", 0, 100, 40)
    b = sweep(spec, "z", 0, 100, 40, workers=4)
    assert all(np.array_equal(x.energies, y.energies) for x, y in zip(a, b))


@pytest.mark.parametrize("lo,hi,steps", [(0, 1, 1), (2, 1, 10), (1, 1, 10)])
def test_sweep_rejects_bad_ranges(lo, hi, steps):
    with pytest.raises(ValueError):
        sweep(HamiltonianSpec("gen4", {"A": 1, "B": 1}), "z", lo, hi, steps)


def test_sweep_rejects_negative_z():
    with pytest.raises(ValueError):
        sweep(HamiltonianSpec("gen4", {"A": 1, "B": 1}), "z", -1, 1, 5)


def test_three_guide_transition_at_2a():
    spec = HamiltonianSpec("three_guide", {"A": 1})
    samples = sweep(spec, "z", 0, 3, 300)
    tr = spectra.find_transitions(spec, "z", samples)
    assert len(tr) == 1 and abs(tr[0].param_value - 2) <= 1e-6


def test_bose_hubbard_all_real_below_one():
    samples = sweep(HamiltonianSpec("bh", {"N": 4}), "z", 0, 0.99, 100)
    assert all(s.classification.n_real == 4 for s in samples)


def test_csv_layout(tmp_path):
    samples = sweep(HamiltonianSpec("gen4", {"A": 64, "B": -27}), "z", 0, 1, 3)
    path = tmp_path / "s.csv"
    spectra.write_csv(path, samples)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["z", "re_E1", "re_E2", "re_E3", "re_E4", "im_E1", "im_E2", "im_E3", "im_E4",
                       "class_real", "class_imag", "class_complex", "class_zero"]
    assert len(rows) == 4
    assert float(rows[2][1]) == pytest.approx(samples[1].energies[0].real)
