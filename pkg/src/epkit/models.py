"""Complex symmetric tridiagonal Hamiltonian families.

Every family resolves a small set of real parameters to a matrix with
``H == H.T`` exactly and zeros outside the three central diagonals:

================  =========================  =========================================
family            parameters                 matrix
================  =========================  =========================================
``bose_hubbard``  N, gamma (or z = gamma^2)  diag i*gamma*(2k-N-1), off sqrt(k(N-k))
``gen4``          A, B, z                    diag i*sqrt(z)*(-3,-1,1,3), off sqrt(B,A,B)
``gen5``          A, B, z                    diag i*sqrt(z)*(-4,-2,0,2,4), off sqrt(B,A,A,B)
``two_guide``     delta, g, gamma1, gamma2   [[delta - i*gamma1/2, g], [g, -i*gamma2/2]]
``three_guide``   A, z                       diag i*sqrt(z)*(-1,0,1), off sqrt(A)
================  =========================  =========================================

Square roots of negative ``A`` or ``B`` take the principal branch, so
``B = -27`` gives the off-diagonal entry ``3i*sqrt(3)``.  For the N = 3
Bose-Hubbard member the literature often writes ``g = sqrt(2)*gamma``; both
``gamma`` and ``g`` are accepted for that case.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

FAMILIES = ("bose_hubbard", "gen4", "gen5", "two_guide", "three_guide")
ALIASES = {"bh": "bose_hubbard", "bosehubbard": "bose_hubbard", "twoguide": "two_guide",
           "threeguide": "three_guide"}
DIMENSIONS = {"gen4": 4, "gen5": 5, "two_guide": 2, "three_guide": 3}
REQUIRED = {
    "gen4": ("A", "B", "z"),
    "gen5": ("A", "B", "z"),
    "two_guide": ("delta", "g", "gamma1", "gamma2"),
    "three_guide": ("A", "z"),
}


def canonical_family(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = ALIASES.get(key.replace("_", ""), ALIASES.get(key, key))
    if key not in FAMILIES:
        raise ValueError(f"unknown model family {name!r}; expected one of {FAMILIES}")
    return key


@dataclass(frozen=True)
class HamiltonianSpec:
    """A model family name plus its real parameters."""

    family: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        object.__setattr__(self, "params", dict(self.params))

    def with_params(self, **updates) -> "HamiltonianSpec":
        p = dict(self.params)
        if self.family == "bose_hubbard":
            # a sweep over z must not leave a stale gamma behind (and vice versa)
            if "z" in updates:
                p.pop("gamma", None)
                p.pop("g", None)
            if "gamma" in updates or "g" in updates:
                p.pop("z", None)
        p.update(updates)
        return HamiltonianSpec(self.family, p)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        return cls(d["family"], d.get("params", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "HamiltonianSpec":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True, eq=False)
class ResolvedHamiltonian:
    spec: HamiltonianSpec
    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _real(params: dict, name: str) -> float:
    if name not in params or params[name] is None:
        raise ValueError(f"missing parameter {name!r}")
    v = params[name]
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ValueError(f"parameter {name!r} must be real, got {v!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"parameter {name!r} must be finite, got {v}")
    return v


def _sqrt_z(params: dict) -> float:
    z = _real(params, "z")
    if z < 0:
        raise ValueError(f"z must be non-negative, got {z}")
    return math.sqrt(z)


def psqrt(x: float) -> complex:
    """Principal square root of a real number as a complex value."""
    return complex(np.sqrt(complex(x, 0.0)))


def tridiagonal(diag, off) -> np.ndarray:
    """Complex symmetric tridiagonal matrix from its diagonal and off-diagonal."""
    d = np.asarray(diag, dtype=complex)
    H = np.diag(d)
    for k, v in enumerate(off):
        H[k, k + 1] = H[k + 1, k] = v
    return H


def bose_hubbard_matrix(N: int, gamma: float) -> np.ndarray:
    k = np.arange(1, N + 1)
    return tridiagonal(1j * gamma * (2 * k - N - 1), [math.sqrt(j * (N - j)) for j in range(1, N)])


def _bose_hubbard_gamma(params: dict) -> float:
    if "gamma" in params:
        return _real(params, "gamma")
    if "g" in params:
        if int(_real(params, "N")) != 3:
            raise ValueError("parameter 'g' (= sqrt(2)*gamma) is only defined for N = 3")
        return _real(params, "g") / math.sqrt(2)
    if "z" in params:
        return _sqrt_z(params)
    raise ValueError("bose_hubbard needs one of 'gamma', 'g' or 'z'")


def build(spec: HamiltonianSpec) -> ResolvedHamiltonian:
    """Resolve a :class:`HamiltonianSpec` to its concrete matrix."""
    p = spec.params
    fam = spec.family
    if fam == "bose_hubbard":
        N = _real(p, "N")
        if N != int(N) or N < 1:
            raise ValueError(f"N must be a positive integer, got {p['N']!r}")
        H = bose_hubbard_matrix(int(N), _bose_hubbard_gamma(p))
    elif fam == "gen4":
        r, a, b = _sqrt_z(p), psqrt(_real(p, "A")), psqrt(_real(p, "B"))
        H = tridiagonal(1j * r * np.array([-3, -1, 1, 3]), [b, a, b])
    elif fam == "gen5":
        r, a, b = _sqrt_z(p), psqrt(_real(p, "A")), psqrt(_real(p, "B"))
        H = tridiagonal(1j * r * np.array([-4, -2, 0, 2, 4]), [b, a, a, b])
    elif fam == "two_guide":
        return two_guide(_real(p, "delta"), _real(p, "g"), _real(p, "gamma1"), _real(p, "gamma2"))
    elif fam == "three_guide":
        return three_guide(_real(p, "A"), _real(p, "z"))
    else:  # pragma: no cover - canonical_family guards this
        raise ValueError(fam)
    return ResolvedHamiltonian(spec, H)


def two_guide(delta: float, g: float, gamma1: float, gamma2: float) -> ResolvedHamiltonian:
    """Two coupled lossy waveguides: detuning, coupling and the two loss rates."""
    vals = dict(delta=delta, g=g, gamma1=gamma1, gamma2=gamma2)
    for k in vals:
        vals[k] = _real(vals, k)
    H = np.array(
        [[vals["delta"] - 0.5j * vals["gamma1"], vals["g"]], [vals["g"], -0.5j * vals["gamma2"]]],
        dtype=complex,
    )
    return ResolvedHamiltonian(HamiltonianSpec("two_guide", vals), H)


def three_guide(A: float, z: float) -> ResolvedHamiltonian:
    """Three waveguides with gain/loss +-sqrt(z) and symmetric coupling sqrt(A)."""
    p = {"A": A, "z": z}
    r, a = _sqrt_z(p), psqrt(_real(p, "A"))
    H = tridiagonal([-1j * r, 0.0, 1j * r], [a, a])
    return ResolvedHamiltonian(HamiltonianSpec("three_guide", {"A": float(A), "z": float(z)}), H)


def ep_limit_two_guide(gamma1: float, gamma2: float) -> np.ndarray:
    """Zero-detuning two-guide matrix at the coalescence coupling ``(gamma1 - gamma2)/4``."""
    return 0.25 * np.array(
        [[-2j * gamma1, gamma1 - gamma2], [gamma1 - gamma2, -2j * gamma2]], dtype=complex
    )


def ep3_three_guide() -> np.ndarray:
    """Three-guide matrix at A = 1/2, z = 1, where all three modes coalesce."""
    s = 1 / math.sqrt(2)
    return np.array([[-1j, s, 0], [s, 0, s], [0, s, 1j]], dtype=complex)


def exact_matrix(spec: HamiltonianSpec):
    """The resolved matrix with exact sympy entries (params taken as exact rationals)."""
    import sympy as sp

    p = {k: sp.nsimplify(v, rational=True) if not isinstance(v, sp.Basic) else v
         for k, v in spec.params.items()}
    I, sqrt = sp.I, sp.sqrt

    def tri(diag, off):
        n = len(diag)
        M = sp.zeros(n, n)
        for k, d in enumerate(diag):
            M[k, k] = d
        for k, o in enumerate(off):
            M[k, k + 1] = M[k + 1, k] = o
        return M

    fam = spec.family
    if fam == "gen4":
        r = sqrt(p["z"])
        return tri([-3 * I * r, -I * r, I * r, 3 * I * r], [sqrt(p["B"]), sqrt(p["A"]), sqrt(p["B"])])
    if fam == "gen5":
        r = sqrt(p["z"])
        return tri([-4 * I * r, -2 * I * r, 0, 2 * I * r, 4 * I * r],
                   [sqrt(p["B"]), sqrt(p["A"]), sqrt(p["A"]), sqrt(p["B"])])
    if fam == "three_guide":
        r = sqrt(p["z"])
        return tri([-I * r, 0, I * r], [sqrt(p["A"])] * 2)
    if fam == "bose_hubbard":
        N = int(p["N"])
        gam = p["gamma"] if "gamma" in p else (p["g"] / sqrt(2) if "g" in p else sqrt(p["z"]))
        return tri([I * gam * (2 * k - N - 1) for k in range(1, N + 1)],
                   [sqrt(k * (N - k)) for k in range(1, N)])
    if fam == "two_guide":
        return sp.Matrix([[p["delta"] - I * p["gamma1"] / 2, p["g"]], [p["g"], -I * p["gamma2"] / 2]])
    raise ValueError(fam)  # pragma: no cover


def default_scan_parameter(spec: HamiltonianSpec) -> str:
    if spec.family == "two_guide":
        return "g"
    if spec.family == "bose_hubbard" and "z" not in spec.params:
        return "gamma"
    return "z"
