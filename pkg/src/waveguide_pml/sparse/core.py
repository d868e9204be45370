from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ResourceError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_EIG_LIMIT = 2500
# above this half-bandwidth the O(n b^2) banded factorization loses to SuperLU
MAX_BANDED_BANDWIDTH = 400
SYMMETRY_TOL = 1e-13


class ComplexSparse:
    """Square complex matrix in compressed-row storage.

    Column indices are sorted within each row and duplicates are summed on
    construction.  ``symmetric=True`` asserts ``A == A.T`` (unconjugated)
    and is verified to a relative tolerance of ``1e-13``.
    """

    def __init__(self, matrix, symmetric: bool = False):
        csr = sp.csr_matrix(matrix, dtype=complex)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got shape {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        self.csr = csr
        self.symmetric = bool(symmetric)
        if self.symmetric:
            asym = self.asymmetry()
            if asym > SYMMETRY_TOL:
                raise ValueError(f"matrix flagged symmetric but max|A - A^T|/max|A| = {asym:.3e}")

    @classmethod
    def from_coo(cls, rows, cols, values, n: int, symmetric: bool = False) -> "ComplexSparse":
        return cls(sp.coo_matrix((values, (rows, cols)), shape=(n, n)), symmetric=symmetric)

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def __matmul__(self, other):
        return self.csr @ other

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def asymmetry(self) -> float:
        """``max_ij |A_ij - A_ji| / max_ij |A_ij|``."""
        if self.csr.nnz == 0:
            return 0.0
        diff = (self.csr - self.csr.T).tocoo()
        scale = np.max(np.abs(self.csr.data))
        return float(np.max(np.abs(diff.data), initial=0.0) / scale)

    def bandwidth(self) -> int:
        coo = self.csr.tocoo()
        if coo.nnz == 0:
            return 0
        return int(np.max(np.abs(coo.row - coo.col)))

    def to_coo_text(self, path) -> None:
        """Write ``row col re im`` lines (0-based) after an ``n nnz`` header."""
        coo = self.csr.tocoo()
        with open(path, "w") as fh:
            fh.write(f"{self.n} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")

    @classmethod
    def from_coo_text(cls, path, symmetric: bool = False) -> "ComplexSparse":
        with open(path) as fh:
            n, nnz = (int(t) for t in fh.readline().split())
            data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 4))
        if len(data) != nnz:
            raise ValueError(f"expected {nnz} entries, found {len(data)}")
        return cls.from_coo(
            data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2] + 1j * data[:, 3], n, symmetric
        )


def _kernel():
    from . import kernel

    return kernel


class BandedLDLT:
    """``A = L D L^T`` of a complex symmetric band matrix, without pivoting.

    The factor is immutable after construction and may be shared between
    threads; :meth:`solve` allocates its own work array.
    """

    def __init__(self, A: ComplexSparse, pivot_rtol: float = 1e-13):
        if not A.symmetric:
            raise ValueError("banded LDL^T needs a matrix flagged symmetric")
        n, b = A.n, A.bandwidth()
        lower = sp.tril(A.csr).tocoo()
        ab = np.zeros((n + b, b + 1), dtype=complex)
        ab[lower.col, lower.row - lower.col] = lower.data
        scale = np.max(np.abs(lower.data), initial=0.0)
        _kernel().ldlt_factor(ab, n, pivot_rtol * scale)
        ab.setflags(write=False)
        self._ab = ab
        self.n = n
        self.bandwidth = b

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        vec = rhs.ndim == 1
        work = np.ascontiguousarray(rhs.reshape(self.n, -1)).copy()
        _kernel().ldlt_solve(self._ab, self.n, work)
        return work[:, 0] if vec else work


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float
    method: str


def _rel_residual(A: ComplexSparse, x, b) -> float:
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(A @ x - b) / bnorm)


class Factorization:
    """Reusable direct factorization with a residual check on every solve."""

    def __init__(self, A: ComplexSparse, method: Optional[str] = None):
        self.A = A
        if method is None:
            method = "banded" if A.symmetric and A.bandwidth() <= MAX_BANDED_BANDWIDTH else "superlu"
        if method == "banded":
            try:
                self._lu = BandedLDLT(A)
            except ZeroDivisionError as exc:
                logger.info("banded LDL^T broke down (%s); using SuperLU", exc)
                method = "superlu"
        if method == "superlu":
            self._lu = spla.splu(A.csr.tocsc())
        elif method != "banded":
            raise ValueError(f"unknown solve method {method!r}")
        self.method = method

    def _raw(self, b):
        return self._lu.solve(b)

    def solve(self, b, tol: float = DEFAULT_TOL) -> SolveResult:
        b = np.asarray(b, dtype=complex)
        if b.shape[0] != self.A.n:
            raise ValueError(f"rhs has length {b.shape[0]}, matrix dimension is {self.A.n}")
        if not np.any(b):
            return SolveResult(np.zeros_like(b), 0.0, self.method)
        x = self._raw(b)
        res = _rel_residual(self.A, x, b)
        for _ in range(3):
            if res <= tol or not np.isfinite(res):
                break
            x = x + self._raw(b - self.A @ x)
            res = _rel_residual(self.A, x, b)
        if not res <= tol:
            raise SolverError(f"relative residual {res:.3e} exceeds tol {tol:.1e} ({self.method})", res)
        return SolveResult(x, res, self.method)


def solve(A: ComplexSparse, b, tol: float = DEFAULT_TOL, method: Optional[str] = None) -> SolveResult:
    """Solve ``A x = b`` to relative residual ``tol``.

    Symmetric band matrices go through the banded LDL^T kernel; others,
    very wide bands, or a pivot breakdown fall back to SuperLU.  Up to
    three steps of iterative refinement are applied before giving up.
    """
    return Factorization(A, method).solve(b, tol)


def dense_eig_small(A: ComplexSparse, limit: int = DEFAULT_EIG_LIMIT) -> np.ndarray:
    """All eigenvalues of a small matrix, sorted by real then imaginary part."""
    if A.n > limit:
        raise ResourceError(f"dimension {A.n} exceeds dense eigensolve limit {limit}")
    dense = A.toarray()
    if not np.any(dense.imag) and np.array_equal(dense.real, dense.real.T):
        ev = scipy.linalg.eigvalsh(dense.real).astype(complex)
    else:
        ev = scipy.linalg.eigvals(dense)
    return ev[np.lexsort((ev.imag, ev.real))]
