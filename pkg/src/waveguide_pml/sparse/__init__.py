"""Complex sparse storage, direct solves and small dense eigensolves."""

from .core import (
    DEFAULT_TOL,
    BandedLDLT,
    ComplexSparse,
    Factorization,
    SolveResult,
    dense_eig_small,
    solve,
)
from .kernel import IMPLEMENTATION

__all__ = [
    "DEFAULT_TOL",
    "BandedLDLT",
    "ComplexSparse",
    "Factorization",
    "IMPLEMENTATION",
    "SolveResult",
    "dense_eig_small",
    "solve",
]
