# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled banded LDL^T kernel for complex symmetric matrices.

Storage: ``ab[j, k] = A[j + k, j]`` for ``0 <= k <= b``, padded with ``b``
zero rows so that ``ab`` has shape ``(n + b, b + 1)``.  On return
``ab[j, 0]`` holds ``D[j]`` and ``ab[j, k]`` the unit-lower factor
``L[j + k, j]``.
"""

cdef extern from "complex.h":
    double cabs(double complex) nogil


def ldlt_factor(double complex[:, ::1] ab, Py_ssize_t n, double pivot_tol):
    cdef Py_ssize_t b = ab.shape[1] - 1
    cdef Py_ssize_t j, k, m, kmax
    cdef double complex d, vm, lm
    with nogil:
        for j in range(n):
            d = ab[j, 0]
            if cabs(d) <= pivot_tol:
                with gil:
                    raise ZeroDivisionError(f"pivot {j} has modulus {cabs(d):.3e}")
            kmax = b if j + b < n else n - 1 - j
            for m in range(1, kmax + 1):
                vm = ab[j, m]
                if vm == 0:
                    continue
                lm = vm / d
                for k in range(m, kmax + 1):
                    ab[j + m, k - m] -= ab[j, k] * lm
            for k in range(1, kmax + 1):
                ab[j, k] = ab[j, k] / d


def ldlt_solve(const double complex[:, ::1] ab, Py_ssize_t n, double complex[:, ::1] rhs):
    """Overwrite ``rhs`` (shape ``(n, nrhs)``) with the solution."""
    cdef Py_ssize_t b = ab.shape[1] - 1
    cdef Py_ssize_t nrhs = rhs.shape[1]
    cdef Py_ssize_t j, k, c, kmax
    cdef double complex acc, xj
    with nogil:
        for j in range(n):
            kmax = b if j + b < n else n - 1 - j
            for c in range(nrhs):
                xj = rhs[j, c]
                if xj != 0:
                    for k in range(1, kmax + 1):
                        rhs[j + k, c] -= ab[j, k] * xj
        for j in range(n):
            for c in range(nrhs):
                rhs[j, c] = rhs[j, c] / ab[j, 0]
        for j in range(n - 1, -1, -1):
            kmax = b if j + b < n else n - 1 - j
            for c in range(nrhs):
                acc = rhs[j, c]
                for k in range(1, kmax + 1):
                    acc -= ab[j, k] * rhs[j + k, c]
                rhs[j, c] = acc
