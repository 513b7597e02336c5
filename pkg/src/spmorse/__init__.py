"""Exact computations with isotropic-basis complexes of the integral symplectic lattice."""

from .symplectic import ConstructionError, LatticeVector, PreconditionError, parse_vector, format_vector
from .complexes import ComplexSpec, FiniteComplex, enumerate_truncation, is_simplex
from .morse import BasedChainComplex, Matching, validate_matching
from .e1 import E1Config, build_e1, build_field_deg01, certify, extend_field_deg2

__all__ = [
    "BasedChainComplex", "ComplexSpec", "ConstructionError", "E1Config", "FiniteComplex", "LatticeVector",
    "Matching", "PreconditionError", "build_e1", "build_field_deg01", "certify", "enumerate_truncation",
    "extend_field_deg2", "format_vector", "is_simplex", "parse_vector", "validate_matching",
]
__version__ = "0.1.0"
