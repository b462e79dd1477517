"""Hidden-Hermiticity metrics ``H^dagger Theta = Theta H`` and pseudospectra.

Hermitian matrices are handled through the real orthonormal parametrization

    E_kk,   (E_jk + E_kj) / sqrt(2),   i (E_jk - E_kj) / sqrt(2)    (j < k)

so that the Euclidean product of coefficient vectors equals the real Frobenius
product ``Re tr(A^dagger B)``.  The metric equation is linear in these N^2 real
unknowns; its kernel is the metric family.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect, minimize

from . import numerics
from .numerics import inf_norm

KERNEL_TOL = 1e-9
POSITIVITY_TOL = 1e-10
BOUNDARY_XTOL = 1e-12


class MetricDegenerateError(ValueError):
    """The metric family degenerates (H at or near an exceptional point)."""


class NotPositiveError(ValueError):
    """A metric required to be positive definite is not."""


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Frobenius-orthonormal real basis of the n x n Hermitian matrices."""
    out = []
    for k in range(n):
        M = np.zeros((n, n), complex)
        M[k, k] = 1
        out.append(M)
    s = 1 / np.sqrt(2)
    for j in range(n):
        for k in range(j + 1, n):
            M = np.zeros((n, n), complex)
            M[j, k] = M[k, j] = s
            out.append(M)
            M = np.zeros((n, n), complex)
            M[j, k], M[k, j] = 1j * s, -1j * s
            out.append(M)
    return out


def hermitian_coordinates(M) -> np.ndarray:
    """Coordinates of a Hermitian ``M`` in :func:`hermitian_basis`."""
    M = np.asarray(M, complex)
    return np.array([np.vdot(B, M).real for B in hermitian_basis(M.shape[0])])


def _operator(H: np.ndarray) -> np.ndarray:
    """Real matrix of ``Theta -> H^dagger Theta - Theta H`` on Hermitian coordinates."""
    Hd = H.conj().T
    cols = [(Hd @ B - B @ H).ravel() for B in hermitian_basis(H.shape[0])]
    C = np.array(cols).T
    return np.vstack([C.real, C.imag])


def metric_residual(H, Theta) -> float:
    """``||H^dagger Theta - Theta H||_inf``."""
    H = np.asarray(H, complex)
    return inf_norm(H.conj().T @ Theta - Theta @ H)


def _combine(basis, c) -> np.ndarray:
    return sum(ci * B for ci, B in zip(c, basis))


@dataclass(frozen=True, eq=False)
class CoefficientSlice:
    """Affine line ``origin + t * direction`` in coefficient space."""

    origin: np.ndarray
    directions: np.ndarray


@dataclass(frozen=True, eq=False)
class MetricFamily:
    """Hermitian solutions of the metric equation for a fixed ``H``.

    Attributes
    ----------
    basis : list of ndarray
        Frobenius-orthonormal Hermitian matrices spanning the kernel.
    reference_point : ndarray or None
        Coefficients of the minimally anisotropic member: smallest
        ``||Theta - tr(Theta)/N I||_F`` at unit trace.  ``None`` when the
        family has no member with nonzero trace.
    degenerate : bool
        The spectrum of ``H`` is not real and simple.
    has_positive_member : bool
        A coefficient search found a positive definite member.
    """

    H: np.ndarray
    basis: list
    reference_point: np.ndarray | None
    degenerate: bool
    has_positive_member: bool
    max_min_eigenvalue: float

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def member(self, c) -> np.ndarray:
        c = np.asarray(c, float)
        if c.shape != (self.dimension,):
            raise ValueError(f"expected {self.dimension} coefficients, got shape {c.shape}")
        return _combine(self.basis, c)

    def coefficients(self, Theta, tol: float = 1e-8) -> np.ndarray:
        """Coefficients of ``Theta``; raises if ``Theta`` is not in the family."""
        c = np.array([np.vdot(B, Theta).real for B in self.basis])
        err = np.abs(self.member(c) - Theta).max()
        if err > tol * max(1.0, np.abs(Theta).max()):
            raise ValueError(f"matrix is not a member of the family (distance {err:.3g})")
        return c

    def reference_member(self) -> np.ndarray:
        if self.reference_point is None:
            raise ValueError("family has no unit-trace member")
        return self.member(self.reference_point)

    def constrained(self, entries: dict) -> CoefficientSlice:
        """Affine set of coefficients with prescribed matrix entries.

        ``entries`` maps ``(row, col)`` to a complex value.  The returned
        origin is the minimum-norm solution; ``directions`` spans what is left.
        """
        rows, rhs = [], []
        for (i, j), v in entries.items():
            a = np.array([B[i, j] for B in self.basis])
            rows += [a.real, a.imag]
            rhs += [complex(v).real, complex(v).imag]
        M, y = np.array(rows), np.array(rhs)
        c, *_ = np.linalg.lstsq(M, y, rcond=None)
        if np.abs(M @ c - y).max() > 1e-8 * max(1.0, np.abs(y).max()):
            raise ValueError("no family member has the requested entries")
        free = numerics.null_space(M, tol=KERNEL_TOL) if M.size else np.eye(self.dimension)
        return CoefficientSlice(c, free.real.T)

    def to_dict(self) -> dict:
        def mat(M):
            return {"re": np.real(M).tolist(), "im": np.imag(M).tolist()}

        return {
            "schema": 1,
            "dimension": self.dimension,
            "degenerate": self.degenerate,
            "has_positive_member": self.has_positive_member,
            "max_min_eigenvalue": self.max_min_eigenvalue,
            "reference_point": None if self.reference_point is None else self.reference_point.tolist(),
            "basis": [mat(B) for B in self.basis],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def min_eigenvalue(Theta) -> float:
    return float(np.linalg.eigvalsh(np.asarray(Theta, complex))[0])


def _min_separation(E) -> float:
    d = np.abs(E[:, None] - E[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min()) if E.size > 1 else np.inf


def _spectrum_real_simple(H, tol: float = 1e-8) -> bool:
    E = numerics.eigenvalues(H)
    scale = max(1.0, float(np.abs(E).max()))
    if np.abs(E.imag).max() > tol * scale:
        return False
    return _min_separation(E) > tol * scale


def _reference_point(basis, n: int) -> np.ndarray | None:
    traces = np.array([np.trace(B).real for B in basis])
    if np.abs(traces).max() < 1e-12:
        return None
    # minimise ||sum c_i (B_i - tr(B_i)/n I)||^2 subject to traces . c = 1
    D = np.array([(B - np.trace(B).real / n * np.eye(n)).ravel() for B in basis]).T
    G = (D.conj().T @ D).real
    m = len(basis)
    K = np.block([[2 * G, traces[:, None]], [traces[None, :], np.zeros((1, 1))]])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:m]


def _max_min_eigenvalue(basis, start) -> float:
    """Maximise the smallest eigenvalue of the member over unit coefficient vectors."""
    m = len(basis)

    def f(c):
        nrm = np.linalg.norm(c)
        if nrm == 0:
            return 1.0
        return -min_eigenvalue(_combine(basis, c / nrm))

    best = -f(start)
    if m == 1:
        return max(best, -f(-start))
    res = minimize(f, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    return max(best, -float(res.fun))


def solve_metric_family(H, kernel_tol: float = KERNEL_TOL) -> MetricFamily:
    """Kernel of ``Theta -> H^dagger Theta - Theta H`` on Hermitian matrices.

    The kernel is found by SVD of the real N^2 x 2N^2 operator; singular values
    below ``kernel_tol * sigma_max`` count as zero.  The family is always
    returned; ``degenerate`` flags a spectrum that is not real and simple.
    """
    H = numerics.as_matrix(H)
    n = H.shape[0]
    L = _operator(H)
    s = numerics.singular_values(L)
    _, _, Vh = np.linalg.svd(L)
    ref = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > kernel_tol * ref))
    coords = Vh[rank:].T
    herm = hermitian_basis(n)
    basis = [_combine(herm, coords[:, k]) for k in range(coords.shape[1])]
    basis = [0.5 * (B + B.conj().T) for B in basis]
    point = _reference_point(basis, n) if basis else None
    start = point / np.linalg.norm(point) if point is not None else np.eye(len(basis))[0] if basis else None
    best = _max_min_eigenvalue(basis, start) if basis else -np.inf
    return MetricFamily(
        H=H,
        basis=basis,
        reference_point=point,
        degenerate=not _spectrum_real_simple(H),
        has_positive_member=bool(best > POSITIVITY_TOL),
        max_min_eigenvalue=float(best),
    )


@dataclass(frozen=True)
class PositivityDomain:
    """Smallest-eigenvalue profile of ``Theta(origin + t * direction)``.

    ``boundaries`` are the parameters where the smallest eigenvalue changes
    sign; ``positive_intervals`` are the sub-ranges where it is positive.
    """

    t_range: tuple
    boundaries: list
    positive_intervals: list = field(default_factory=list)


def positivity_domain(
    family: MetricFamily,
    origin,
    direction,
    t_range: tuple = (-2.0, 2.0),
    samples: int = 401,
    xtol: float = BOUNDARY_XTOL,
) -> PositivityDomain:
    """Positive-definite part of a line in the family.

    ``origin`` and ``direction`` are coefficient vectors, or Hermitian matrices
    belonging to the family (then converted).  Sign changes of the smallest
    eigenvalue on a uniform sample are bisected to ``xtol``.
    """
    o, d = (np.asarray(v) for v in (origin, direction))
    if o.ndim == 2:
        o = family.coefficients(o)
    if d.ndim == 2:
        d = family.coefficients(d)
    if not np.any(d):
        raise ValueError("slice direction is zero")

    def lam(t):
        return min_eigenvalue(family.member(o + t * d))

    ts = np.linspace(*t_range, samples)
    vals = np.array([lam(t) for t in ts])
    if np.all(np.abs(vals) <= POSITIVITY_TOL):
        raise ValueError("slice is entirely degenerate")
    bounds = []
    for a, b, fa, fb in zip(ts, ts[1:], vals, vals[1:]):
        if fa == 0:
            bounds.append(float(a))
        elif fa * fb < 0:
            bounds.append(float(bisect(lam, a, b, xtol=xtol)))
    if vals[-1] == 0:
        bounds.append(float(ts[-1]))
    edges = [float(ts[0]), *bounds, float(ts[-1])]
    pos = [(lo, hi) for lo, hi in zip(edges, edges[1:]) if lam(0.5 * (lo + hi)) > 0]
    return PositivityDomain(tuple(map(float, t_range)), bounds, pos)


@dataclass(frozen=True, eq=False)
class PerturbationResult:
    K: np.ndarray
    residual: float
    consistent: bool


def metric_perturbation(H0, Theta0, V, family: MetricFamily | None = None,
                        consistency_tol: float = 1e-10) -> PerturbationResult:
    """First-order metric correction ``K``: ``H0^dagger K - K H0 = Theta0 V - V^dagger Theta0``.

    The homogeneous part is removed: ``K`` is Frobenius-orthogonal to every
    member of the unperturbed family.  When the right side is not in the range
    (the perturbation makes the spectrum non-real to first order) the
    least-squares ``K`` is returned with ``consistent=False``.

    Raises
    ------
    MetricDegenerateError
        ``H0`` has a non-simple spectrum, so the family degenerates.
    """
    H0 = numerics.as_matrix(H0)
    Theta0 = numerics.as_matrix(Theta0)
    V = numerics.as_matrix(V)
    n = H0.shape[0]
    E = numerics.eigenvalues(H0)
    if _min_separation(E) <= 1e-8 * max(1.0, float(np.abs(E).max())):
        raise MetricDegenerateError("metric family degenerates: H0 has a repeated eigenvalue")
    R = Theta0 @ V - V.conj().T @ Theta0
    L = _operator(H0)
    y = np.concatenate([R.ravel().real, R.ravel().imag])
    U, s, Vh = np.linalg.svd(L, full_matrices=False)
    keep = s > KERNEL_TOL * s[0] if s.size and s[0] > 0 else np.zeros_like(s, bool)
    coef = Vh[keep].T @ ((U[:, keep].T @ y) / s[keep])
    if family is not None and family.dimension:
        # explicit projection, in case the caller's family differs numerically
        fam = np.array([hermitian_coordinates(B) for B in family.basis])
        q, _ = np.linalg.qr(fam.T)
        coef = coef - q @ (q.T @ coef)
    K = _combine(hermitian_basis(n), coef)
    res = inf_norm(H0.conj().T @ K - K @ H0 - R)
    scale = max(1.0, inf_norm(R)) * max(1.0, inf_norm(H0))
    return PerturbationResult(K, float(res), bool(res <= consistency_tol * scale))


# ---------------------------------------------------------------------------
# Pseudospectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Rectangle ``[re_min, re_max] x [im_min, im_max]`` with node counts."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int = 51
    n_im: int = 51

    def nodes(self) -> np.ndarray:
        re = np.linspace(self.re_min, self.re_max, self.n_re)
        im = np.linspace(self.im_min, self.im_max, self.n_im)
        return re[None, :] + 1j * im[:, None]


@dataclass(frozen=True, eq=False)
class PseudospectrumGrid:
    grid: Grid
    values: np.ndarray
    mode: str

    def rows(self):
        for lam, v in zip(self.grid.nodes().ravel(), self.values.ravel()):
            yield float(lam.real), float(lam.imag), float(v)


def sqrt_metric(Theta, tol: float = POSITIVITY_TOL):
    """``(Theta^{1/2}, Theta^{-1/2})`` by Hermitian eigendecomposition."""
    Theta = numerics.as_matrix(Theta)
    w, U = np.linalg.eigh(0.5 * (Theta + Theta.conj().T))
    if w[0] < tol:
        raise NotPositiveError(f"metric is not positive definite (smallest eigenvalue {w[0]:.3g})")
    r = np.sqrt(w)
    return (U * r) @ U.conj().T, (U / r) @ U.conj().T


def effective_matrix(H, mode: str = "F", theta=None) -> np.ndarray:
    """``H`` itself (F) or ``Theta^{1/2} H Theta^{-1/2}`` (S)."""
    H = numerics.as_matrix(H)
    mode = mode.upper()
    if mode == "F":
        return H
    if mode != "S":
        raise ValueError(f"mode must be 'F' or 'S', got {mode!r}")
    if theta is None:
        raise ValueError("S-mode needs a metric")
    S, Si = sqrt_metric(theta)
    return S @ H @ Si


def sigma_min_at(H_eff, lam: complex) -> float:
    return numerics.smallest_singular_value(H_eff - lam * np.eye(H_eff.shape[0]))


def pseudospectrum(H, mode: str = "F", theta=None, grid: Grid | None = None,
                   workers: int = 1) -> PseudospectrumGrid:
    """``sigma_min(H_eff - lambda)`` at every node of ``grid``."""
    if grid is None:
        raise ValueError("a grid is required")
    A = effective_matrix(H, mode, theta)
    nodes = grid.nodes().ravel()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(lambda z: sigma_min_at(A, z), nodes))
    else:
        vals = [sigma_min_at(A, z) for z in nodes]
    return PseudospectrumGrid(grid, np.array(vals).reshape(grid.n_im, grid.n_re), mode.upper())


def write_pseudospectrum_csv(path, ps: PseudospectrumGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "sigma_min"])
        for row in ps.rows():
            w.writerow([repr(v) for v in row])


# ---------------------------------------------------------------------------
# Closed-form members for the two smallest Bose-Hubbard cases
# ---------------------------------------------------------------------------


def bh2_metric(beta: float, gamma: float) -> np.ndarray:
    """Unit-diagonal N = 2 member with off-diagonal ``beta + i gamma``."""
    return np.array([[1, beta + 1j * gamma], [beta - 1j * gamma, 1]], dtype=complex)


def bh3_metric(beta: float, delta: float, g: float) -> np.ndarray:
    """Two-parameter N = 3 member in the ``g = sqrt(2) gamma`` convention."""
    return np.eye(3) + np.array([
        [0, beta + 1j * g, delta + 1j * g * beta],
        [beta - 1j * g, delta + g * g, beta + 1j * g],
        [delta - 1j * g * beta, beta - 1j * g, 0],
    ], dtype=complex)


def bh3_minimal_eigenvalues(g: float) -> np.ndarray:
    """Closed-form eigenvalues ``1, 1 + g^2/2 +- sqrt(8 g^2 + g^4)/2`` (ascending)."""
    r = 0.5 * np.sqrt(8 * g * g + g ** 4)
    return np.sort(np.array([1.0, 1 + 0.5 * g * g - r, 1 + 0.5 * g * g + r]))


def bh3_boundaries() -> dict:
    """The two candidate limits of the N = 3 minimal metric, in both conventions.

    ``metric``: the smallest closed-form eigenvalue vanishes at g = 1.
    ``spectrum``: the energies coalesce at gamma = 1, i.e. g = sqrt(2).
    """
    return {
        "metric": {"g": 1.0, "gamma": 1 / np.sqrt(2)},
        "spectrum": {"g": float(np.sqrt(2)), "gamma": 1.0},
    }
