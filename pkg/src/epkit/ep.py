"""Exceptional points: analytic EP4/EP5 branches, numeric detection, Jordan
structure and transition matrices (``H Q = Q J``)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import numerics
from .models import HamiltonianSpec, build, psqrt
from .numerics import DEFAULT_RANK_TOL, inf_norm

CLUSTER_TOL = 1e-2
DEFECT_TOL = 1e-6


class ChainError(RuntimeError):
    """A generalized eigenvector chain could not be built for the requested partition."""


# ---------------------------------------------------------------------------
# Analytic branches
# ---------------------------------------------------------------------------

# Vanishing of both secular roots x_+- at once.  Each entry: (linear, quadratic).
EP_CONDITIONS = {
    "gen4": (
        lambda A, B, z: B - 5 * z + Fraction(1, 2) * A,
        lambda A, B, z: -64 * B * z + 4 * B * A + 64 * z * z + 16 * z * A + A * A,
    ),
    "gen5": (
        lambda A, B, z: B - 10 * z + A,
        lambda A, B, z: -36 * z * B + 36 * z * z + 12 * z * A + A * A,
    ),
}


@dataclass(frozen=True)
class EPBranch:
    """Line of EP parameters ``B = b*z``, ``A = a*z``."""

    model: str
    b: Fraction
    a: Fraction

    def params(self, z) -> dict:
        return {"A": self.a * z, "B": self.b * z, "z": z}

    def residuals(self, z) -> tuple:
        lin, quad = EP_CONDITIONS[self.model]
        p = self.params(z)
        return lin(p["A"], p["B"], z), quad(p["A"], p["B"], z)

    def certify_exact(self) -> bool:
        """Both conditions vanish identically in z (checked at 4 rational points)."""
        return all(r == 0 for z in (Fraction(0), Fraction(1), Fraction(2), Fraction(-7, 3))
                   for r in self.residuals(z))

    def float_residual(self, z: float) -> float:
        """Relative residual in floating arithmetic (scaled by |A| + |B| + |z|, squared for the quadratic)."""
        lin, quad = self.residuals(float(z))
        p = self.params(float(z))
        scale = abs(p["A"]) + abs(p["B"]) + abs(z)
        if scale == 0:
            return 0.0
        return max(abs(lin) / scale, abs(quad) / scale**2)

    def to_dict(self) -> dict:
        return {"model": self.model, "B": f"{self.b}*z", "A": f"{self.a}*z",
                "certified_exact": self.certify_exact()}


def _rational_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def analytic_ep_branches(model: str) -> list[EPBranch]:
    """Solve the two EP conditions of ``model`` exactly for lines through the origin.

    The conditions are homogeneous in (A, B, z), so at z = 1 the linear one
    fixes B(A) and the quadratic one becomes a quadratic in A with rational
    roots.  Each branch returned is certified in rational arithmetic.
    """
    if model not in EP_CONDITIONS:
        raise ValueError(f"analytic branches only known for {sorted(EP_CONDITIONS)}")
    lin, quad = EP_CONDITIONS[model]
    one = Fraction(1)
    l0 = lin(Fraction(0), Fraction(0), one)
    lA = lin(one, Fraction(0), one) - l0
    lB = lin(Fraction(0), one, one) - l0

    def b_of(A):
        return -(lA * A + l0) / lB

    q = [quad(Fraction(A), b_of(Fraction(A)), one) for A in (0, 1, 2)]
    c0 = q[0]
    c2 = (q[2] - 2 * q[1] + q[0]) / 2
    c1 = q[1] - c0 - c2
    root = _rational_sqrt(c1 * c1 - 4 * c2 * c0)
    if c2 == 0 or root is None:
        raise ArithmeticError(f"EP conditions for {model} have no rational branches")
    branches = []
    for a in sorted({(-c1 + root) / (2 * c2), (-c1 - root) / (2 * c2)}, key=abs):
        br = EPBranch(model, b_of(a), a)
        if not br.certify_exact():  # pragma: no cover - algebra guarantees this
            raise ArithmeticError(f"branch {br} failed certification")
        branches.append(br)
    return branches


# ---------------------------------------------------------------------------
# Jordan structure
# ---------------------------------------------------------------------------


def _blocks_from_ranks(ranks: list[int]) -> list[int]:
    # ranks[k] = rank((H - E)^k), ranks[0] = N
    at_least = [ranks[k - 1] - ranks[k] for k in range(1, len(ranks))]
    blocks = []
    for k, cnt in enumerate(at_least, start=1):
        nxt = at_least[k] if k < len(at_least) else 0
        blocks += [k] * (cnt - nxt)
    return sorted(blocks, reverse=True)


def _unit_scale(A: np.ndarray, Nmat: np.ndarray) -> float:
    # rounding leaves H - E at ~eps*||H|| near a simple eigenvalue, so never scale that up
    return max(np.linalg.norm(Nmat, 2), np.linalg.norm(A, 2))


def rank_sequence(H, E: complex, kmax: int | None = None, tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """``[rank((H - E I)^k) for k = 0..kmax]``, stopping once it stabilises.

    Ranks are taken relative to ``max(||H - E I||, ||H||)^k`` so that the powers
    of a nilpotent part are not judged against their own (vanishing) norm.
    """
    A = numerics.as_matrix(H)
    n = A.shape[0]
    kmax = n if kmax is None else kmax
    Nmat = A - E * np.eye(n)
    base = _unit_scale(A, Nmat)
    if base == 0:
        return [n, 0]
    Nmat = Nmat / base
    ranks = [n]
    P = np.eye(n, dtype=complex)
    for _ in range(kmax):
        P = P @ Nmat
        ranks.append(numerics.rank_tol(P, tol, scale=1.0))
        if ranks[-1] == ranks[-2]:
            break
    return ranks


def jordan_blocks_at(H, E: complex, tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """Jordan block sizes of ``H`` at eigenvalue ``E`` from the rank sequence."""
    return _blocks_from_ranks(rank_sequence(H, E, tol=tol))


def jordan_partition(H, E: complex, tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """Blocks at ``E`` followed by size-1 entries for the rest of the spectrum.

    Raises ``ValueError`` when ``E`` is not an eigenvalue at tolerance ``tol``.
    """
    A = numerics.as_matrix(H)
    blocks = jordan_blocks_at(A, E, tol)
    if not blocks:
        raise ValueError(f"E = {E} is not an eigenvalue of H at rank tolerance {tol}")
    return blocks + [1] * (A.shape[0] - sum(blocks))


@dataclass(frozen=True)
class EigenCluster:
    energy: complex
    members: tuple
    blocks: tuple

    @property
    def multiplicity(self) -> int:
        return len(self.members)


def jordan_structure(
    H, cluster_tol: float = CLUSTER_TOL, tol: float = DEFAULT_RANK_TOL, energies=None
) -> list[EigenCluster]:
    """Group the spectrum into coalescing clusters and attach Jordan blocks.

    Eigenvalues closer than ``cluster_tol * max(1, ||H||)`` form a candidate
    cluster; its centroid (well conditioned even when the members are not) is
    tested with the rank sequence.  Clusters whose algebraic multiplicity at
    ``tol`` falls short of their size are split at finer radii.
    """
    A = numerics.as_matrix(H)
    n = A.shape[0]
    E = numerics.eigenvalues(A) if energies is None else np.asarray(energies, dtype=complex)
    scale = max(1.0, inf_norm(A))
    out: list[EigenCluster] = []

    def visit(idx, rad):
        for group in numerics._cluster_indices(E[idx], rad):
            members = [idx[g] for g in group]
            center = E[members].mean()
            if len(members) == 1:
                out.append(EigenCluster(complex(center), tuple(members), (1,)))
                continue
            blocks = jordan_blocks_at(A, center, tol)
            if sum(blocks) == len(members):
                out.append(EigenCluster(complex(center), tuple(members), tuple(blocks)))
            elif rad > 1e-12 * scale:
                visit(members, rad / 10)
            else:
                out.extend(EigenCluster(complex(E[m]), (m,), (1,)) for m in members)

    visit(list(range(n)), cluster_tol * scale)
    return sorted(out, key=lambda c: numerics._sort_key(c.energy))


def full_partition(clusters: list[EigenCluster]) -> list[int]:
    return sorted((b for c in clusters for b in c.blocks), reverse=True)


# ---------------------------------------------------------------------------
# Transition matrices
# ---------------------------------------------------------------------------


def jordan_block(E: complex, k: int) -> np.ndarray:
    return E * np.eye(k, dtype=complex) + np.eye(k, k=1)


def jordan_matrix(pairs) -> np.ndarray:
    """Block-diagonal J from ``[(E, k), ...]``."""
    n = sum(k for _, k in pairs)
    J = np.zeros((n, n), dtype=complex)
    i = 0
    for E, k in pairs:
        J[i : i + k, i : i + k] = jordan_block(E, k)
        i += k
    return J


@dataclass(frozen=True, eq=False)
class JordanDecomposition:
    J: np.ndarray
    Q: np.ndarray
    residual: float
    blocks: list = field(default_factory=list)  # [(E, size), ...] in column order

    def to_dict(self) -> dict:
        def cm(M):
            return [[[float(a.real), float(a.imag)] for a in row] for row in M]

        return {"blocks": [{"energy": [E.real, E.imag], "size": k} for E, k in self.blocks],
                "J": cm(self.J), "Q": cm(self.Q), "residual": self.residual}


def _gauge(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    big = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())[0]
    return v * (abs(v[big]) / v[big])


def _orth(cols: list[np.ndarray], n: int, tol: float) -> np.ndarray:
    if not cols:
        return np.zeros((n, 0), dtype=complex)
    M = np.column_stack(cols)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    return u[:, s > tol * max(1.0, s[0])] if s.size else u[:, :0]


def _chains(H: np.ndarray, E: complex, blocks, tol: float) -> list[list[np.ndarray]]:
    n = H.shape[0]
    Nm = H - E * np.eye(n)
    kmax = max(blocks)
    # powers of the unit-norm (H - E), judged on one absolute scale as in rank_sequence
    nrm = _unit_scale(H, Nm)
    Nn = Nm / nrm if nrm > 0 else Nm
    powers = [np.eye(n, dtype=complex)]
    for _ in range(kmax):
        powers.append(powers[-1] @ Nn)
    kernels = [np.zeros((n, 0), dtype=complex)] + [
        numerics.null_space(powers[k], tol, scale=1.0) for k in range(1, kmax + 1)]
    tops: list[tuple[np.ndarray, int]] = []
    for k in range(kmax, 0, -1):
        for _ in range(sum(1 for b in blocks if b == k)):
            taken = [kernels[k - 1][:, j] for j in range(kernels[k - 1].shape[1])]
            taken += [powers[L - k] @ t for t, L in tops]
            S = _orth(taken, n, 1e-10)
            K = kernels[k]
            if K.shape[1] == 0:
                raise ChainError(f"no generalized eigenvectors of rank {k} at E={E}")
            P = K - S @ (S.conj().T @ K)
            u, s, _ = np.linalg.svd(P, full_matrices=False)
            if s.size == 0 or s[0] < 1e-8:
                raise ChainError(f"partition {list(blocks)} inconsistent with H at E={E}")
            tops.append((u[:, 0], k))
    chains = []
    for t, k in tops:
        v = [_gauge(powers[k - 1] @ t)]
        for _ in range(k - 1):
            x, *_ = np.linalg.lstsq(Nm, v[-1], rcond=tol)
            if np.linalg.norm(Nm @ x - v[-1]) > 1e-6 * max(1.0, np.linalg.norm(v[-1])):
                raise ChainError(f"chain equation (H-E)x = v inconsistent at E={E}")
            v.append(x)
        chains.append(v)
    return chains


def jordan_decomposition(
    H, cluster_tol: float = CLUSTER_TOL, tol: float = DEFAULT_RANK_TOL, clusters=None
) -> JordanDecomposition:
    """Full ``H Q = Q J`` decomposition over all eigenvalue clusters.

    Chains are gauge-fixed: each v1 has unit norm with its first significant
    component real and positive, and every later vector is the minimum-norm
    solution of ``(H - E) x = v_j`` (hence orthogonal to the kernel).
    """
    A = numerics.as_matrix(H)
    clusters = jordan_structure(A, cluster_tol, tol) if clusters is None else clusters
    cols, pairs = [], []
    for c in clusters:
        for chain in _chains(A, c.energy, c.blocks, tol):
            cols += chain
            pairs.append((c.energy, len(chain)))
    Q = np.column_stack(cols)
    J = jordan_matrix(pairs)
    s = np.linalg.svd(Q, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise ChainError(f"transition matrix numerically singular (sigma ratio {s[-1] / s[0]:.2e})")
    return JordanDecomposition(J, Q, inf_norm(A @ Q - Q @ J), pairs)


def transition_matrix(H, E: complex, partition, tol: float = DEFAULT_RANK_TOL) -> JordanDecomposition:
    """``H Q = Q J`` with the Jordan structure at ``E`` required to match ``partition``.

    ``partition`` may be the local form returned by :func:`jordan_partition`
    or the full block structure of ``H``.
    """
    A = numerics.as_matrix(H)
    clusters = jordan_structure(A, tol=tol)
    want = sorted(partition, reverse=True)
    local = jordan_partition(A, E, tol)
    if want not in (local, full_partition(clusters)):
        raise ChainError(f"partition {list(partition)} does not match H at E={E} (found {local})")
    return jordan_decomposition(A, tol=tol, clusters=clusters)


def jordan_residual(H, Q, J) -> float:
    return inf_norm(np.asarray(H) @ Q - Q @ np.asarray(J))


def reference_transition_matrix(name: str, z: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (H, Q) pairs for the EP4/EP5 models; ``H Q = Q J(0)`` at z = 1.

    ``name`` is one of ``bh4``, ``gen4``, ``bh5``, ``gen5``.
    """
    s3, s6, r = math.sqrt(3), math.sqrt(6), math.sqrt(z)
    if name == "bh4":
        H = build(HamiltonianSpec("gen4", {"A": 4, "B": 3, "z": z})).matrix
        Q = [[6j * z**1.5, -6 * z, -3j * r, 1],
             [-6 * z**1.5 * s3, -4j * z * s3, s3 * r, 0],
             [-3j * z**1.5 * s3 * 2, s3 * z * 2, 0, 0],
             [3 * z**1.5 * 2, 0, 0, 0]]
    elif name == "gen4":
        H = build(HamiltonianSpec("gen4", {"A": 64, "B": -27, "z": z})).matrix
        m = psqrt(-3 * z)
        Q = [[216j * z**1.5, -36 * z, -3j * r, 1],
             [72 * z * m, -12j * r * m, 3 * m, 0],
             [-9j * z * m * 8, 3 * m * 8 * r, 0, 0],
             [-27 * z**1.5 * 8, 0, 0, 0]]
    elif name == "bh5":
        H = build(HamiltonianSpec("gen5", {"A": 6, "B": 4, "z": z})).matrix
        Q = [[24, 24j, -12, -4j, 1],
             [48j, -36, -12j, 2, 0],
             [-24 * s6, -12j * s6, 2 * s6, 0, 0],
             [-48j, 12, 0, 0, 0],
             [24, 0, 0, 0, 0]]
    elif name == "gen5":
        H = build(HamiltonianSpec("gen5", {"A": -54, "B": 64, "z": z})).matrix
        Q = [[-3456, -576j, 48, -4j, 1],
             [-1728j, -144, -48j, 8, 0],
             [-1728j * s6, 144 * s6, 24j * s6, 0, 0],
             [1728j, -432, 0, 0, 0],
             [-3456, 0, 0, 0, 0]]
    else:
        raise ValueError(f"unknown reference transition matrix {name!r}")
    return H, np.array(Q, dtype=complex)


REFERENCE_Q_NAMES = ("bh4", "gen4", "bh5", "gen5")


# ---------------------------------------------------------------------------
# Numeric detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EPRecord:
    param_value: float
    energy: complex
    order: int
    partition: list
    eigenvalue_spread: float
    defectivity_evidence: float
    degenerate_energies: list = field(default_factory=list)
    param: str = "z"

    def to_dict(self) -> dict:
        return {
            "z": self.param_value,
            "param": self.param,
            "energy": [self.energy.real, self.energy.imag],
            "order": self.order,
            "partition": list(self.partition),
            "degenerate_energies": [[e.real, e.imag] for e in self.degenerate_energies],
            "residuals": {"eigenvalue_spread": self.eigenvalue_spread,
                          "defectivity_evidence": self.defectivity_evidence},
        }


def min_gap(E) -> float:
    E = np.asarray(E, dtype=complex)
    if E.size < 2:
        return math.inf
    D = np.abs(E[:, None] - E[None, :])
    return float(D[np.triu_indices(E.size, 1)].min())


def eigenvector_matrix_sigma(H, E) -> float:
    """Smallest singular value of the matrix of unit right eigenvectors."""
    A = numerics.as_matrix(H)
    n = A.shape[0]
    V = np.empty((n, len(E)), dtype=complex)
    for j, e in enumerate(E):
        _, _, vh = np.linalg.svd(A - e * np.eye(n))
        V[:, j] = vh[-1].conj()
    return float(np.linalg.svd(V, compute_uv=False)[-1])


def golden_min(f, a: float, b: float, xtol: float, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section minimisation of ``f`` on ``[a, b]``."""
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    else:
        raise numerics.ConvergenceError("golden-section refinement did not reach tolerance")
    x = c if fc <= fd else d
    return x, min(fc, fd)


def classify_point(
    spec: HamiltonianSpec, param: str, value: float,
    cluster_tol: float = CLUSTER_TOL, tol: float = DEFAULT_RANK_TOL,
) -> EPRecord | None:
    """EPRecord for ``spec`` at ``param = value`` if H is defective there, else None."""
    H = build(spec.with_params(**{param: value})).matrix
    E = numerics.eigenvalues(H)
    clusters = jordan_structure(H, cluster_tol, tol, energies=E)
    defective = [c for c in clusters if max(c.blocks) >= 2]
    if not defective:
        return None
    main = max(defective, key=lambda c: (max(c.blocks), -abs(c.energy)))
    spread = max(float(np.abs(E[list(c.members)] - c.energy).max()) for c in defective)
    return EPRecord(
        param_value=float(value),
        energy=main.energy,
        order=max(main.blocks),
        partition=full_partition(clusters),
        eigenvalue_spread=spread,
        defectivity_evidence=eigenvector_matrix_sigma(H, E),
        degenerate_energies=[c.energy for c in defective],
        param=param,
    )


def coalescence_defect(H, center: complex, m: int) -> float:
    """How far ``H`` is from having an ``m``-fold eigenvalue near ``center``.

    The characteristic polynomial of ``H / ||H||`` is expanded around the
    simple root of its (m-1)-th derivative next to ``center``; the sum of the
    Taylor coefficients of orders 0..m-2 vanishes exactly at an m-fold root and
    is linear in the parameter distance for a generic crossing.
    """
    A = numerics.as_matrix(H)
    s = max(1.0, inf_norm(A))
    p = numerics.char_poly(A / s)
    d = p
    for _ in range(m - 1):
        d = d.derivative()
    dd = d.derivative()
    c = center / s
    for _ in range(20):
        den = dd(c)
        if den == 0:
            break
        step = d(c) / den
        c -= step
        if abs(step) <= numerics.EPS * max(1.0, abs(c)):
            break
    t = p.taylor(c)
    return float(np.sum(np.abs(t[: m - 1])))


def _polish(spec, param, x, lo, hi, xtol, cluster_tol):
    H = build(spec.with_params(**{param: x})).matrix
    E = numerics.eigenvalues(H)
    rad = cluster_tol * max(1.0, inf_norm(H))
    groups = [g for g in numerics._cluster_indices(E, rad) if len(g) >= 2]
    if not groups:
        return x
    group = max(groups, key=len)
    center, m = complex(E[group].mean()), len(group)

    def f(v):
        return coalescence_defect(build(spec.with_params(**{param: v})).matrix, center, m)

    w = 1e-4 * max(1.0, abs(x))
    a, b = max(lo, x - w), min(hi, x + w)
    y, fy = golden_min(f, a, b, xtol)
    return y if fy <= f(x) else x


def detect_ep_numeric(
    spec: HamiltonianSpec,
    param: str,
    lo: float,
    hi: float,
    samples: int = 401,
    refine_tol: float = 1e-13,
    cluster_tol: float = CLUSTER_TOL,
    defect_tol: float = DEFECT_TOL,
    tol: float = DEFAULT_RANK_TOL,
) -> list[EPRecord]:
    """Locate exceptional points of ``spec`` as ``param`` runs over ``[lo, hi]``.

    The minimal pairwise eigenvalue gap is sampled on a grid; every interior
    local minimum is refined by golden-section search to
    ``refine_tol * max(1, |value|)``, then polished by a second golden-section
    pass on :func:`coalescence_defect` (eigenvalues near a K-fold coalescence
    only resolve the parameter to ~eps^(2/K); the polynomial coefficients
    resolve it to ~eps).  A refined point is kept when the gap has
    closed (below ``cluster_tol * max(1, ||H||)``), the unit eigenvector matrix
    is numerically singular (``sigma_min < defect_tol``) and the rank sequence
    shows a Jordan block of size >= 2.
    """
    grid = np.linspace(lo, hi, samples)

    def gap(v):
        return min_gap(numerics.eigenvalues(build(spec.with_params(**{param: v})).matrix))

    g = np.array([gap(v) for v in grid])
    records: list[EPRecord] = []
    for i in range(1, samples - 1):
        if not (g[i] <= g[i - 1] and g[i] < g[i + 1]):
            continue
        xtol = refine_tol * max(1.0, abs(grid[i]))
        x, gx = golden_min(gap, grid[i - 1], grid[i + 1], xtol)
        H = build(spec.with_params(**{param: x})).matrix
        if gx > cluster_tol * max(1.0, inf_norm(H)):
            continue
        x = _polish(spec, param, x, grid[i - 1], grid[i + 1], xtol, cluster_tol)
        rec = classify_point(spec, param, x, cluster_tol, tol)
        if rec is None or rec.defectivity_evidence >= defect_tol:
            continue
        if records and abs(records[-1].param_value - x) <= 10 * refine_tol * max(1.0, abs(x)):
            continue
        records.append(rec)
    return records
