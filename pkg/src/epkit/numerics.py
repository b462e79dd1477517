"""Dense complex linear algebra for small matrices (N <= 8).

Matrices are plain ``numpy`` complex arrays.  Eigenvalues come from the
characteristic polynomial (Hessenberg expansion) and simultaneous Aberth
iteration, polished by Newton steps on ``det(M - lambda I)``.  Singular values,
kernels and the Sylvester solver lean on LAPACK through ``numpy.linalg``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

EPS = np.finfo(float).eps
DEFAULT_RANK_TOL = 1e-8
MAX_DIMENSION = 8


class ConvergenceError(RuntimeError):
    """An iterative kernel did not converge."""


class ResonantSylvesterError(ValueError):
    """``A K - K B = C`` has no unique solution (spectra of A and B overlap)."""


def as_matrix(M, square: bool = True) -> np.ndarray:
    """Return ``M`` as a 2-D complex array, checking shape and finiteness."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def inf_norm(M) -> float:
    """Maximum absolute row sum."""
    A = np.asarray(M)
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial with coefficients in ascending degree.

    ``coefficients`` is a complex array in floating mode and an object array of
    exact sympy numbers in exact mode.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.dtype != object:
            c = c.astype(complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        object.__setattr__(self, "coefficients", c)

    @property
    def exact(self) -> bool:
        return self.coefficients.dtype == object

    @property
    def degree(self) -> int:
        nz = [k for k, a in enumerate(self.coefficients) if a != 0]
        return nz[-1] if nz else 0

    def trimmed(self) -> "Polynomial":
        return Polynomial(self.coefficients[: self.degree + 1])

    def monic(self) -> "Polynomial":
        p = self.trimmed()
        return Polynomial(p.coefficients / p.coefficients[-1])

    def __call__(self, x):
        acc = 0 * x + self.coefficients[-1]
        for a in self.coefficients[-2::-1]:
            acc = acc * x + a
        return acc

    def derivative(self) -> "Polynomial":
        c = self.coefficients
        if c.size == 1:
            return Polynomial(c[:1] * 0)
        return Polynomial(c[1:] * np.arange(1, c.size))

    def taylor(self, x0) -> np.ndarray:
        """Coefficients of ``p(x0 + t)`` in ascending powers of ``t``."""
        c = self.coefficients
        n = c.size
        return np.array(
            [sum(comb(i, j) * c[i] * x0 ** (i - j) for i in range(j, n)) for j in range(n)],
            dtype=c.dtype,
        )

    def roots(self, **kw) -> np.ndarray:
        return aberth_roots(self, **kw)

    def __repr__(self):
        return f"Polynomial({list(self.coefficients)!r})"


def _initial_guesses(c: np.ndarray) -> np.ndarray:
    # c monic, ascending, degree n >= 2
    n = c.size - 1
    center = -c[n - 1] / n
    shifted = Polynomial(c).taylor(center)
    radius = max(abs(shifted[k]) ** (1.0 / (n - k)) for k in range(n))
    radius = max(radius, 1e-12 * max(1.0, abs(center)))
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    return center + radius * np.exp(1j * angles)


def aberth_roots(poly: Polynomial, tol_factor: float = 8.0, max_iter: int = 500) -> np.ndarray:
    """All roots of ``poly`` by simultaneous Aberth-Ehrlich iteration.

    A root stops moving once ``|p(z)|`` reaches the Horner rounding bound at
    ``z`` (times ``tol_factor``) or its correction is at rounding level.
    Raises :class:`ConvergenceError` after ``max_iter`` sweeps.
    """
    p = poly.trimmed()
    n = p.degree
    if n == 0:
        return np.empty(0, dtype=complex)
    c = (p.coefficients / p.coefficients[-1]).astype(complex)
    n_zero = int(np.argmax(c != 0))
    if n_zero:
        rest = aberth_roots(Polynomial(c[n_zero:]), tol_factor, max_iter)
        return np.concatenate([np.zeros(n_zero, dtype=complex), rest])
    if n == 1:
        return np.array([-c[0]])
    dp = Polynomial(c).derivative().coefficients
    abs_c = np.abs(c)
    z = _initial_guesses(c)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        for k in range(n):
            if done[k]:
                continue
            zk = z[k]
            pk = np.polyval(c[::-1], zk)
            bound = tol_factor * 2 * n * EPS * np.polyval(abs_c[::-1], abs(zk))
            if abs(pk) <= bound or pk == 0:
                done[k] = True
                continue
            ratio = pk / np.polyval(dp[::-1], zk)
            diff = zk - np.delete(z, k)
            if np.any(diff == 0):
                z[k] = zk + 1e-10 * (1 + abs(zk)) * np.exp(0.7j * k)
                continue
            step = ratio / (1 - ratio * np.sum(1.0 / diff))
            z[k] = zk - step
            if abs(step) <= 2 * EPS * abs(z[k]):
                done[k] = True
        if done.all():
            return z
    raise ConvergenceError(f"Aberth iteration did not converge in {max_iter} sweeps")


def _is_hessenberg(A: np.ndarray) -> bool:
    return not np.any(np.tril(A, -2))


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Unitary similarity to upper Hessenberg form (Householder)."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        if not np.any(x[1:]):
            continue
        # rescale first: the squared norm of a tiny column would fall into subnormals
        e = np.frexp(np.abs(x).max())[1]
        x = np.ldexp(x.real, -e) + 1j * np.ldexp(x.imag, -e)
        alpha = np.linalg.norm(x)
        phase = np.exp(1j * np.angle(x[0])) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _char_poly_exact(M) -> Polynomial:
    import sympy as sp

    def exact(a):
        if isinstance(a, (complex, float, int, np.number)):
            a = complex(a)
            return sp.Rational(a.real) + sp.I * sp.Rational(a.imag)
        return sp.sympify(a)

    rows = M.tolist() if hasattr(M, "tolist") else [list(r) for r in M]
    S = sp.Matrix([[exact(a) for a in r] for r in rows])
    if S.rows != S.cols:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    lam = sp.Symbol("lam")
    desc = S.charpoly(lam).all_coeffs()
    coeffs = [sp.simplify(sp.expand(a)) for a in desc[::-1]]
    return Polynomial(np.array(coeffs, dtype=object))


def char_poly(M, exact: bool = False) -> Polynomial:
    """Characteristic polynomial ``det(lambda I - M)``, ascending coefficients.

    Floating mode scales ``M`` to unit norm, reduces it to Hessenberg form
    (skipped when it already is, so tridiagonal input is used verbatim) and
    expands the determinant by the Hessenberg recurrence.  ``exact=True``
    treats entries as exact sympy numbers (floats are taken as their exact
    binary value) and returns exact coefficients.
    """
    if exact:
        return _char_poly_exact(M)
    A = as_matrix(M)
    n = A.shape[0]
    s = max(1.0, inf_norm(A))
    H = A / s
    if not _is_hessenberg(H):
        H = hessenberg(H)
    # p[k] = char poly of leading k x k block, ascending coefficients
    p = [np.array([1.0 + 0j])]
    for k in range(1, n + 1):
        nxt = np.zeros(k + 1, dtype=complex)
        nxt[1:] += p[k - 1]
        nxt[:k] -= H[k - 1, k - 1] * p[k - 1]
        prod = 1.0 + 0j
        for i in range(k - 1, 0, -1):
            prod *= H[i, i - 1]
            term = H[i - 1, k - 1] * prod
            if term != 0:
                nxt[:i] -= term * p[i - 1]
        p.append(nxt)
    coeffs = p[n] * s ** (n - np.arange(n + 1))
    return Polynomial(coeffs)


def _cluster_indices(z: np.ndarray, radius: float) -> list[list[int]]:
    """Single-linkage groups of points closer than ``radius``."""
    n = z.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _is_multiple_root(c: np.ndarray, center: complex, m: int, tol_factor: float) -> bool:
    # c: ascending coefficients of a degree-n polynomial of a unit-norm matrix
    n = c.size - 1
    t = Polynomial(c).taylor(center)
    r = abs(center)
    for j in range(m):
        bound = tol_factor * EPS * sum(comb(i, j) * comb(n, i) * r ** (i - j) for i in range(j, n + 1))
        if abs(t[j]) > bound:
            return False
    return True


def _backward_error(A: np.ndarray, lam: complex) -> float:
    # smallest perturbation (2-norm) that makes lam an eigenvalue of A
    return float(np.linalg.svd(A - lam * np.eye(A.shape[0]), compute_uv=False)[-1])


def consolidate_multiple_roots(
    c: np.ndarray, roots: np.ndarray, tol_factor: float = 30.0, radius: float = 0.1,
    matrix: np.ndarray | None = None,
) -> np.ndarray:
    """Replace numerically split multiple roots by their centroid.

    A cluster of ``m`` roots collapses only when the first ``m`` Taylor
    coefficients at the centroid vanish to within the coefficient error model
    (``tol_factor`` ulps scaled by binomial weights).  ``c`` must come from a
    matrix scaled to unit norm.  Clusters that fail are retried at smaller radii.

    The coefficients alone cannot tell an m-fold root from ``m`` simple roots
    closer than ~eps^(1/m); when ``matrix`` is given, the centroid must also be
    an eigenvalue of it up to a backward error of ``tol_factor`` ulps.
    """
    out = roots.copy()

    def refine_center(center: complex, m: int) -> complex:
        # an m-fold root is a simple root of the (m-1)-th derivative
        d = Polynomial(c)
        for _ in range(m - 1):
            d = d.derivative()
        dd = d.derivative()
        for _ in range(8):
            den = dd(center)
            if den == 0:
                break
            step = d(center) / den
            center = center - step
            if abs(step) <= EPS * max(1.0, abs(center)):
                break
        return center

    def visit(idx: list[int], rad: float):
        if len(idx) < 2:
            return
        for group in _cluster_indices(out[idx], rad):
            members = [idx[g] for g in group]
            if len(members) < 2:
                continue
            center = out[members].mean()
            refined = refine_center(center, len(members))
            if abs(refined - center) <= rad:
                center = refined
            if _is_multiple_root(c, center, len(members), tol_factor) and (
                matrix is None or _backward_error(matrix, center) <= tol_factor * matrix.shape[0] * EPS
            ):
                out[members] = center
            elif rad > 1e-9:
                visit(members, rad / 10)

    visit(list(range(out.size)), radius)
    return out


def _abs_det(M: np.ndarray) -> float:
    # LU of an exactly singular matrix divides by zero; callers test isfinite
    with np.errstate(all="ignore"):
        return abs(np.linalg.det(M))


def _newton_polish(A: np.ndarray, lam: complex, guard: float, steps: int = 3) -> complex:
    """Newton on det(A - lam I); accepts only steps that shrink |det| and stay within ``guard``."""
    n = A.shape[0]
    eye = np.eye(n)
    best = lam
    best_val = _abs_det(A - lam * eye)
    for _ in range(steps):
        if best_val == 0.0 or not np.isfinite(best_val):
            break
        try:
            tr = np.trace(np.linalg.inv(A - best * eye))
        except np.linalg.LinAlgError:
            break
        if tr == 0 or not np.isfinite(tr):
            break
        step = 1.0 / tr
        if abs(step) > guard:
            break
        cand = best + step
        val = _abs_det(A - cand * eye)
        if not np.isfinite(val) or val >= best_val:
            break
        best, best_val = cand, val
    return best


def _sort_key(z: complex):
    return (round(z.real, 12), round(z.imag, 12))


def sort_spectrum(values) -> np.ndarray:
    """Sort complex values by (Re, Im) lexicographically."""
    v = np.asarray(values, dtype=complex)
    return np.array(sorted(v, key=_sort_key), dtype=complex)


def _ldexp(z: np.ndarray, e: int) -> np.ndarray:
    return np.ldexp(z.real, e) + 1j * np.ldexp(z.imag, e)


def eigenvalues(M, max_iter: int = 500) -> np.ndarray:
    """All eigenvalues of a square matrix (dimension <= 8) with multiplicity.

    Roots of the characteristic polynomial by Aberth iteration; numerically
    multiple roots are consolidated to their centroid and isolated roots are
    polished by Newton steps on ``det(M - lambda I)``.  Sorted by (Re, Im).
    """
    A = as_matrix(M)
    n = A.shape[0]
    if n > MAX_DIMENSION:
        raise ValueError(f"dimension {n} exceeds supported maximum {MAX_DIMENSION}")
    # work at unit scale so that clustering radii are relative to ||M||;
    # a power of two keeps the scaling exact even for subnormal input
    norm = inf_norm(A)
    e = int(np.frexp(norm)[1]) if norm > 0 else 0
    As = _ldexp(A, -e)
    p = char_poly(As)
    # coefficients below (eps/100)^(n-k) move the roots by less than rounding does;
    # flushing them also keeps Aberth away from subnormal arithmetic
    c = p.coefficients.copy()
    c[np.abs(c) < (EPS / 100) ** (n - np.arange(n + 1))] = 0
    p = Polynomial(c)
    z = aberth_roots(p, max_iter=max_iter)
    z = consolidate_multiple_roots(c, z, matrix=As)
    for k in range(n):
        others = np.delete(z, k)
        sep = np.min(np.abs(others - z[k])) if others.size else np.inf
        if sep > 1e-6:
            z[k] = _newton_polish(As, z[k], guard=0.25 * sep)
    return sort_spectrum(_ldexp(z, e))


# ---------------------------------------------------------------------------
# Singular values, rank, kernels
# ---------------------------------------------------------------------------


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(as_matrix(M, square=False), compute_uv=False)


def rank_tol(M, tol: float = DEFAULT_RANK_TOL, scale: float | None = None) -> int:
    """Number of singular values above ``tol * sigma_max`` (0 for the zero matrix).

    ``scale`` replaces ``sigma_max`` as the reference magnitude; powers of a
    nearly nilpotent matrix need the scale of the base matrix, not their own.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = singular_values(M)
    ref = s[0] if scale is None else scale
    if ref == 0:
        return 0
    return int(np.sum(s > tol * ref))


def smallest_singular_value(M) -> float:
    A = as_matrix(M)
    return float(max(singular_values(A)[-1], 0.0))


def null_space(M, tol: float = DEFAULT_RANK_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal kernel basis as columns; ``N - rank_tol(M, tol, scale)`` of them."""
    A = as_matrix(M, square=False)
    _, s, vh = np.linalg.svd(A)
    ref = s[0] if scale is None else scale
    r = 0 if ref == 0 else int(np.sum(s > tol * ref))
    return vh[r:].conj().T


def solve_sylvester(A, B, C, sep_tol: float = 1e-12) -> np.ndarray:
    """Solve ``A K - K B = C`` through the Kronecker-vectorized N^2 system.

    Raises :class:`ResonantSylvesterError` when the vectorized operator is
    numerically singular, i.e. the spectra of A and B (nearly) overlap.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    C = as_matrix(C, square=False)
    m, n = A.shape[0], B.shape[0]
    if C.shape != (m, n):
        raise ValueError(f"C has shape {C.shape}, expected {(m, n)}")
    # column-major vec: vec(A K) = (I kron A) vec K, vec(K B) = (B^T kron I) vec K
    L = np.kron(np.eye(n), A) - np.kron(B.T, np.eye(m))
    s = np.linalg.svd(L, compute_uv=False)
    scale = max(1.0, s[0])
    if s[-1] <= sep_tol * scale:
        raise ResonantSylvesterError(
            f"resonant Sylvester equation: sigma_min={s[-1]:.3e} of the vectorized operator"
        )
    k = np.linalg.solve(L, C.reshape(-1, order="F"))
    return k.reshape((m, n), order="F")
