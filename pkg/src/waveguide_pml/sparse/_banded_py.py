"""NumPy implementation of the banded LDL^T kernel.

Same storage and arithmetic as the compiled ``_banded`` module; the
rank-one Schur update of each step is done with one gather/scatter over
precomputed flat offsets instead of a double loop.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=16)
def _update_offsets(b: int):
    m, k = np.triu_indices(b, k=0)
    m = m + 1
    k = k + 1
    # flat position of ab[j + m, k - m] relative to row j
    return m * b + k, m - 1, k - 1


def ldlt_factor(ab: np.ndarray, n: int, pivot_tol: float) -> None:
    b = ab.shape[1] - 1
    flat = ab.reshape(-1)
    offs, mi, ki = _update_offsets(b)
    stride = b + 1
    for j in range(n):
        d = ab[j, 0]
        if abs(d) <= pivot_tol:
            raise ZeroDivisionError(f"pivot {j} has modulus {abs(d):.3e}")
        if b == 0:
            continue
        # entries past row n are zero padding, so no end-of-matrix case
        v = ab[j, 1:].copy()
        lv = v / d
        flat[j * stride + offs] -= v[ki] * lv[mi]
        ab[j, 1:] = lv


def ldlt_solve(ab: np.ndarray, n: int, rhs: np.ndarray) -> None:
    b = ab.shape[1] - 1
    for j in range(n):
        kmax = min(b, n - 1 - j)
        if kmax:
            rhs[j + 1 : j + 1 + kmax] -= np.outer(ab[j, 1 : kmax + 1], rhs[j])
    rhs[:n] /= ab[:n, 0:1]
    for j in range(n - 1, -1, -1):
        kmax = min(b, n - 1 - j)
        if kmax:
            rhs[j] -= ab[j, 1 : kmax + 1] @ rhs[j + 1 : j + 1 + kmax]
