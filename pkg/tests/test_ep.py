import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from epkit import ep, numerics
from epkit.ep import (ChainError, analytic_ep_branches, detect_ep_numeric, jordan_decomposition,
                      jordan_matrix, jordan_partition, rank_sequence, transition_matrix)
from epkit.models import (HamiltonianSpec, bose_hubbard_matrix, build, ep3_three_guide,
                          ep_limit_two_guide)
from epkit.numerics import inf_norm


def gen(model, A, B, z):
    return build(HamiltonianSpec(model, {"A": A, "B": B, "z": z})).matrix


# --- analytic branches -------------------------------------------------------


def test_gen4_branches():
    got = {(b.b, b.a) for b in analytic_ep_branches("gen4")}
    assert got == {(Fraction(3), Fraction(4)), (Fraction(-27), Fraction(64))}


def test_gen5_branches():
    got = {(b.b, b.a) for b in analytic_ep_branches("gen5")}
    assert got == {(Fraction(4), Fraction(6)), (Fraction(64), Fraction(-54))}


def test_branch_certification_by_hand():
    # (-27z, 64z): -64Bz + 4BA + 64z^2 + 16zA + A^2 = (1728 - 6912 + 64 + 1024 + 4096) z^2
    assert 1728 - 6912 + 64 + 1024 + 4096 == 0
    br = [b for b in analytic_ep_branches("gen4") if b.b == -27][0]
    for z in (Fraction(1), Fraction(5, 7), Fraction(81)):
        assert br.residuals(z) == (0, 0)


@given(st.sampled_from(["gen4", "gen5"]), st.floats(1e-3, 1e4))
def test_branch_float_residual(model, z):
    for br in analytic_ep_branches(model):
        assert br.float_residual(z) <= 1e-12


@given(st.sampled_from(["gen4", "gen5"]), st.floats(0.05, 50))
def test_branch_gives_total_coalescence(model, z):
    # on every branch all energies vanish: the closed-form roots are both zero
    from epkit.spectra import closed_roots_gen4, closed_roots_gen5

    fn = closed_roots_gen4 if model == "gen4" else closed_roots_gen5
    for br in analytic_ep_branches(model):
        p = br.params(z)
        x, _ = fn(float(p["A"]), float(p["B"]), z)
        # the discriminant is zero only up to rounding of the coefficients, and its
        # square root amplifies that to sqrt(eps) relative to their size
        scale = abs(float(p["A"])) + abs(float(p["B"])) + z
        assert max(map(abs, x)) <= 10 * math.sqrt(np.finfo(float).eps) * scale


def test_no_branches_for_other_models():
    with pytest.raises(ValueError):
        analytic_ep_branches("two_guide")


# --- Jordan partition ------------------------------------------------------


def test_partition_ep3():
    H = ep3_three_guide()
    assert rank_sequence(H, 0) == [3, 2, 1, 0]
    assert jordan_partition(H, 0) == [3]


def test_partition_bose_hubbard_ep4():
    assert jordan_partition(bose_hubbard_matrix(4, 1.0), 0) == [4]


def test_partition_simple_eigenvalue():
    assert jordan_partition(bose_hubbard_matrix(4, 0.0), 1.0) == [1, 1, 1, 1]


def test_partition_far_from_spectrum():
    with pytest.raises(ValueError):
        jordan_partition(bose_hubbard_matrix(2, 0.0), 5.0)


@pytest.mark.parametrize("z,E,want", [
    (1, 0, [4]),
    (81, 0, [2, 1, 1]),
])
def test_partition_gen4(z, E, want):
    assert jordan_partition(gen("gen4", 64, -27, z), E) == want


def test_partition_gen5_stable():
    H = gen("gen5", -54, 64, 1)
    assert jordan_partition(H, 0) == [5]
    H = gen("gen5", -54, 64, 81)
    assert ep.full_partition(ep.jordan_structure(H)) == [2, 2, 1]
    assert jordan_partition(H, 1j * math.sqrt(800)) == [2, 1, 1, 1]


def _random_similar(partition, rng, cond=10.0):
    """S J S^-1 with a random well-conditioned S and known Jordan structure."""
    energies = rng.normal(size=len(partition)) * 3 + 1j * rng.normal(size=len(partition)) * 3
    J = jordan_matrix(list(zip(energies, partition)))
    n = J.shape[0]
    U, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    W, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    S = U @ np.diag(np.linspace(1, cond, n)) @ W
    return S @ J @ np.linalg.inv(S), energies


@st.composite
def partitions(draw):
    parts = draw(st.lists(st.integers(1, 3), min_size=1, max_size=4))
    if sum(parts) > 6:
        parts = parts[:2]
    return parts


@given(partitions(), st.integers(0, 2**31 - 1))
def test_partition_oracle_random_similarity(parts, seed):
    rng = np.random.default_rng(seed)
    H, energies = _random_similar(parts, rng)
    d = np.abs(energies[:, None] - energies[None, :]) + np.eye(len(parts)) * 10
    if d.min() < 0.5:
        return
    for E, k in zip(energies, parts):
        got = jordan_partition(H, E)
        assert max(got) == k
        assert sorted(got, reverse=True) == sorted([k] + [1] * (H.shape[0] - k), reverse=True)
    dec = jordan_decomposition(H)
    assert dec.residual <= 1e-8 * (1 + inf_norm(H))
    assert sorted(k for _, k in dec.blocks) == sorted(parts)


def test_diagonalizable_random_matrix(rng):
    M = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    for E in numerics.eigenvalues(M):
        assert jordan_partition(M, E) == [1, 1, 1, 1, 1] or max(jordan_partition(M, E)) == 1


def test_derogatory_block_structure():
    # two blocks of size 2 at the same eigenvalue plus a simple one
    H, _ = _random_similar([2, 2, 1], np.random.default_rng(7))
    J = jordan_matrix([(0.5, 2), (0.5, 2), (3.0, 1)])
    S = np.random.default_rng(3).normal(size=(5, 5)) + 5 * np.eye(5)
    H = S @ J @ np.linalg.inv(S)
    assert jordan_partition(H, 0.5) == [2, 2, 1]
    dec = jordan_decomposition(H)
    assert dec.residual <= 1e-8 * (1 + inf_norm(H))


# --- transition matrices ---------------------------------------------------


@pytest.mark.parametrize("H", [
    bose_hubbard_matrix(4, 1.0),
    bose_hubbard_matrix(5, 1.0),
    gen("gen4", 64, -27, 1),
    gen("gen4", 64, -27, 81),
    gen("gen5", -54, 64, 1),
    gen("gen5", -54, 64, 81),
    ep3_three_guide(),
    ep_limit_two_guide(2.0, -2.0),
])
def test_decomposition_contract(H):
    d = jordan_decomposition(H)
    assert d.residual <= 1e-8 * (1 + inf_norm(H))
    s = np.linalg.svd(d.Q, compute_uv=False)
    assert s[-1] > 1e-10 * s[0]
    assert np.allclose(d.J, np.triu(d.J)) and np.all(np.triu(d.J, 2) == 0)


def test_chain_gauge():
    d = jordan_decomposition(bose_hubbard_matrix(4, 1.0))
    v1 = d.Q[:, 0]
    assert abs(np.linalg.norm(v1) - 1) < 1e-12
    first = v1[np.flatnonzero(np.abs(v1) > 1e-12)[0]]
    assert abs(first.imag) < 1e-12 and first.real > 0


def test_transition_matrix_checks_partition():
    H = bose_hubbard_matrix(4, 1.0)
    assert transition_matrix(H, 0, [4]).residual < 1e-12
    with pytest.raises(ChainError):
        transition_matrix(H, 0, [2, 2])


def test_hermitian_limit_is_eigenvector_matrix():
    H = bose_hubbard_matrix(3, 0.0)
    d = jordan_decomposition(H)
    assert np.allclose(d.J, np.diag(np.diag(d.J)))
    assert np.allclose(np.sort(np.diag(d.J).real), [-2, 0, 2])
    assert d.residual < 1e-12


@pytest.mark.parametrize("name", ep.REFERENCE_Q_NAMES)
def test_closed_form_q_matrices(name):
    H, Q = ep.reference_transition_matrix(name)
    J = ep.jordan_block(0, H.shape[0])
    assert ep.jordan_residual(H, Q, J) <= 1e-10 * (1 + inf_norm(H))
    assert np.linalg.matrix_rank(Q) == H.shape[0]


def test_q5_integer_entries_exact():
    # the N = 5 Bose-Hubbard transition matrix works in exact integer arithmetic
    import sympy as sp

    from epkit.models import exact_matrix

    H = exact_matrix(HamiltonianSpec("bh", {"N": 5, "z": 1}))
    s6 = sp.sqrt(6)
    Q = sp.Matrix([[24, 24 * sp.I, -12, -4 * sp.I, 1], [48 * sp.I, -36, -12 * sp.I, 2, 0],
                   [-24 * s6, -12 * sp.I * s6, 2 * s6, 0, 0], [-48 * sp.I, 12, 0, 0, 0], [24, 0, 0, 0, 0]])
    J = sp.Matrix(5, 5, lambda i, j: 1 if j == i + 1 else 0)
    assert sp.simplify(H * Q - Q * J) == sp.zeros(5, 5)


# --- numeric detection -------------------------------------------------------


def test_detect_gen4_ep4():
    recs = detect_ep_numeric(HamiltonianSpec("gen4", {"A": 64, "B": -27}), "z", 0.5, 2)
    assert len(recs) == 1
    r = recs[0]
    assert abs(r.param_value - 1) <= 1e-8 and r.order == 4 and r.partition == [4]
    assert abs(r.energy) < 1e-6


def test_detect_gen4_ep2():
    recs = detect_ep_numeric(HamiltonianSpec("gen4", {"A": 64, "B": -27}), "z", 50, 100)
    assert len(recs) == 1
    assert abs(recs[0].param_value - 81) <= 1e-6 and recs[0].partition == [2, 1, 1]
    assert abs(recs[0].energy) < 1e-6


def test_detect_gen5_double_ep2():
    recs = detect_ep_numeric(HamiltonianSpec("gen5", {"A": -54, "B": 64}), "z", 50, 100)
    assert len(recs) == 1
    r = recs[0]
    assert abs(r.param_value - 81) <= 1e-6 and r.partition == [2, 2, 1]
    got = sorted(r.degenerate_energies, key=lambda e: e.imag)
    assert np.allclose(got, [-1j * math.sqrt(800), 1j * math.sqrt(800)], atol=1e-6)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_detect_bose_hubbard(N):
    recs = detect_ep_numeric(HamiltonianSpec("bh", {"N": N}), "z", 0.5, 2)
    assert [r.partition for r in recs] == [[N]]
    assert abs(recs[0].param_value - 1) <= 1e-8


def test_detect_two_guide():
    spec = HamiltonianSpec("two_guide", {"delta": 0, "gamma1": 3, "gamma2": 1})
    recs = detect_ep_numeric(spec, "g", 0.01, 2)
    assert len(recs) == 1 and abs(recs[0].param_value - 0.5) <= 1e-10


def test_detect_ignores_diabolic_crossing():
    # Hermitian level crossing: the gap closes but H stays diagonalizable
    spec = HamiltonianSpec("two_guide", {"delta": 0, "g": 0, "gamma1": 0, "gamma2": 0})
    recs = detect_ep_numeric(spec.with_params(g=0.0), "delta", -1, 1.3)
    assert recs == []


def test_detect_nothing_in_range():
    assert detect_ep_numeric(HamiltonianSpec("bh", {"N": 3}), "z", 0.1, 0.5) == []


def test_record_json_keys():
    rec = detect_ep_numeric(HamiltonianSpec("bh", {"N": 3}), "z", 0.5, 2)[0]
    d = rec.to_dict()
    assert {"z", "energy", "order", "partition", "residuals"} <= d.keys()
    assert set(d["residuals"]) == {"eigenvalue_spread", "defectivity_evidence"}


def test_golden_min_parabola():
    x, fx = ep.golden_min(lambda t: (t - 0.3) ** 2, 0, 1, 1e-10)
    assert abs(x - 0.3) < 1e-9 and fx < 1e-18
