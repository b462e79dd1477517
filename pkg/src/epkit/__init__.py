"""Exceptional points, Jordan structure and hidden-Hermiticity metrics of small
complex symmetric Hamiltonians."""

from .models import HamiltonianSpec, build
from .numerics import char_poly, eigenvalues

__all__ = ["HamiltonianSpec", "build", "char_poly", "eigenvalues"]
__version__ = "0.1.0"
