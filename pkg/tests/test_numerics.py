import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from conftest import complex_matrices
from epkit import numerics
from epkit.models import HamiltonianSpec, build, ep3_three_guide
from epkit.numerics import (Polynomial, ResonantSylvesterError, aberth_roots, char_poly,
                            eigenvalues, null_space, rank_tol, smallest_singular_value,
                            solve_sylvester)
from epkit.spectra import multiset_distance


# --- eigenvalues -----------------------------------------------------------


def test_eigenvalues_two_level():
    g = 0.5
    E = eigenvalues([[-1j * g, 1], [1, 1j * g]])
    assert np.allclose(E, [-np.sqrt(0.75), np.sqrt(0.75)], atol=1e-14)


def test_eigenvalues_identity():
    assert np.array_equal(eigenvalues(np.eye(3)), np.ones(3))


def test_eigenvalues_ep3_all_zero():
    assert np.abs(eigenvalues(ep3_three_guide())).max() < 1e-12


def test_eigenvalues_sorted_by_real_then_imag():
    E = eigenvalues(np.diag([2, 1j, -1j, 1]))
    assert list(E) == [-1j, 1j, 1, 2]


@given(complex_matrices())
def test_eigenvalues_match_lapack(M):
    # independent oracle: LAPACK's QR algorithm
    ref = np.linalg.eigvals(M)
    scale = max(1.0, numerics.inf_norm(M))
    d = multiset_distance(eigenvalues(M), ref)
    # a perturbation of size eps*||M|| moves an m-fold root by ~(eps)^(1/m)
    assert d <= 1e-6 * scale or d <= (1e-13 * scale) ** (1 / M.shape[0]) * scale


@given(complex_matrices())
def test_trace_and_determinant(M):
    E = eigenvalues(M)
    scale = max(1.0, numerics.inf_norm(M))
    assert abs(E.sum() - np.trace(M)) <= 1e-9 * scale
    det = np.linalg.det(M)
    assert abs(np.prod(E) - det) <= 1e-8 * max(abs(det), scale ** M.shape[0] * 1e-6)


@given(complex_matrices())
def test_char_poly_vanishes_at_eigenvalues(M):
    p = char_poly(M)
    E = eigenvalues(M)
    assert np.abs(p(E)).max() <= 1e-8 * np.abs(p.coefficients).max()


def test_eigenvalues_rejects_non_square():
    with pytest.raises(ValueError):
        eigenvalues(np.ones((2, 3)))


def test_eigenvalues_rejects_nan():
    with pytest.raises(ValueError):
        eigenvalues([[np.nan, 0], [0, 1]])


@pytest.mark.parametrize("family,params", [
    ("gen4", {"A": 64, "B": -27, "z": 1}),
    ("gen5", {"A": -54, "B": 64, "z": 1}),
    ("bh", {"N": 5, "z": 1}),
])
def test_high_order_root_is_consolidated(family, params):
    E = eigenvalues(build(HamiltonianSpec(family, params)).matrix)
    assert np.abs(E).max() < 1e-12


# --- characteristic polynomial ----------------------------------------------


def test_char_poly_trivial_cases():
    assert np.allclose(char_poly(np.zeros((2, 2))).coefficients, [0, 0, 1])
    assert np.allclose(char_poly(np.diag([1.0, 2.0])).coefficients, [2, -3, 1])


@given(complex_matrices(n_max=5))
def test_char_poly_matches_numpy_poly(M):
    ours = char_poly(M).coefficients
    ref = np.poly(M)[::-1]  # numpy: descending, from eigenvalues
    scale = max(1.0, numerics.inf_norm(M))
    for k, (a, b) in enumerate(zip(ours, ref)):
        assert abs(a - b) <= 1e-7 * scale ** (M.shape[0] - k)


def test_char_poly_exact_mode_matches_sympy():
    M = sp.Matrix([[sp.Rational(1, 2), 3], [sp.I, -2]])
    p = char_poly(M, exact=True)
    lam = sp.symbols("lam")
    ref = sp.Poly((lam * sp.eye(2) - M).det(), lam).all_coeffs()[::-1]
    assert [sp.simplify(a - b) for a, b in zip(p.coefficients, ref)] == [0, 0, 0]
    assert p.exact


def test_polynomial_taylor_and_derivative():
    p = Polynomial(np.array([1, -3, 3, -1], complex))  # -(x - 1)^3
    assert np.allclose(p.taylor(1.0), [0, 0, 0, -1])
    assert np.allclose(p.derivative().coefficients, [-3, 6, -3])


@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=7))
def test_aberth_recovers_simple_roots(roots):
    roots = np.array(roots)
    d = np.abs(roots[:, None] - roots[None, :]) + np.eye(roots.size) * 10
    if d.min() < 1e-2:
        return
    p = Polynomial(np.poly(roots)[::-1].astype(complex))
    found = aberth_roots(p)
    assert multiset_distance(found, roots) <= 1e-7 * max(1, np.abs(roots).max())


# --- rank / kernel / sigma_min ---------------------------------------------


def test_rank_tol_ep3_powers():
    H = ep3_three_guide()
    assert [rank_tol(np.linalg.matrix_power(H, k)) for k in (1, 2)] == [2, 1]
    assert rank_tol(np.linalg.matrix_power(H, 3), scale=1.0) == 0


def test_rank_tol_basic(rng):
    assert rank_tol(np.eye(4)) == 4
    assert rank_tol(np.zeros((3, 3))) == 0
    u, v = rng.normal(size=4) + 1j * rng.normal(size=4), rng.normal(size=4)
    assert rank_tol(np.outer(u, v)) == 1


def test_rank_tol_rejects_bad_tol():
    with pytest.raises(ValueError):
        rank_tol(np.eye(2), tol=0)


@given(complex_matrices(), st.sampled_from([1e-12, 1e-8, 1e-4]))
def test_rank_plus_nullity(M, tol):
    assert rank_tol(M, tol) + null_space(M, tol).shape[1] == M.shape[0]


def test_null_space_examples():
    assert null_space(np.zeros((3, 3))).shape == (3, 3)
    assert null_space(np.eye(3)).shape == (3, 0)
    H = ep3_three_guide()
    K = null_space(H)
    assert K.shape == (3, 1)
    assert np.linalg.norm(H @ K[:, 0]) <= 1e-10
    assert np.allclose(K.conj().T @ K, np.eye(1))


def test_smallest_singular_value_examples():
    assert smallest_singular_value([[1, 1], [1, 1]]) <= 1e-12
    U = np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)
    assert abs(smallest_singular_value(U) - 1) < 1e-14
    assert abs(smallest_singular_value(np.diag([3, 0.2])) - 0.2) < 1e-15


@given(complex_matrices())
def test_smallest_singular_value_nonnegative_and_bounded(M):
    s = smallest_singular_value(M)
    assert s >= 0
    assert s <= np.abs(eigenvalues(M)).min() * (1 + 1e-6) + 1e-9 * max(1, numerics.inf_norm(M))


# --- Sylvester ---------------------------------------------------------------


def test_sylvester_diagonal_closed_form():
    K = solve_sylvester(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]), np.ones((2, 2)))
    assert np.allclose(K, [[-1 / 2, -1 / 3], [-1, -1 / 2]])


def test_sylvester_zero_rhs():
    K = solve_sylvester(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]), np.zeros((2, 2)))
    assert np.array_equal(K, np.zeros((2, 2)))


def test_sylvester_resonant():
    with pytest.raises(ResonantSylvesterError):
        solve_sylvester(np.eye(2), np.eye(2), np.ones((2, 2)))


def test_sylvester_random_well_separated(rng):
    for _ in range(100):
        n = rng.integers(1, 6)
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) + 10 * np.eye(n)
        C = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        K = solve_sylvester(A, B, C)
        assert numerics.inf_norm(A @ K - K @ B - C) <= 1e-10 * (1 + numerics.inf_norm(C))


def test_hessenberg_preserves_spectrum(rng):
    M = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    Hs = numerics.hessenberg(M)
    assert np.abs(np.tril(Hs, -2)).max() == 0
    assert multiset_distance(np.linalg.eigvals(Hs), np.linalg.eigvals(M)) < 1e-10
