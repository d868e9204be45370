"""Semi-analytic outgoing solutions for the straight waveguide.

For the product metric the field separates into cross-section modes and
each axial amplitude solves ``-u'' - k^2 u = f`` on ``x > 0`` with
``u'(0) = 0`` and an outgoing ``exp(+ikx)`` tail.  The Green's function
is the free-space kernel plus its image in the Neumann wall:

    G(x, x') = i/(2k) * (exp(ik|x - x'|) + exp(ik(x + x')))
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .assembly import SourceSpec
from .cross_section import ModalBasis, axial_wavenumber
from .errors import StationError, ThresholdError

GREEN_RTOL = 1e-9


def _cquad(func, a, b, rtol):
    if b <= a:
        return 0.0
    val, _ = quad(func, a, b, epsrel=rtol, epsabs=0.0, limit=400, complex_func=True)
    return val


def modal_green_solution(
    k: complex,
    source_profile: Callable[[float], complex],
    x_eval,
    support: Tuple[float, float] = (0.0, np.inf),
    rtol: float = GREEN_RTOL,
) -> np.ndarray:
    """Outgoing solution of ``-u'' - k^2 u = f`` on the half-line with ``u'(0) = 0``.

    ``support`` bounds the integration range; the profile is assumed to
    vanish outside it.  Integrals are split at the evaluation point so the
    kink of ``|x - x'|`` never sits inside a quadrature panel.
    """
    k = complex(k)
    if abs(k) < 1e-8:
        raise ThresholdError("axial wavenumber at threshold (|k| < 1e-8)")
    if k.imag < 0:
        raise ValueError("outgoing branch needs Im k >= 0")
    a, b = max(0.0, support[0]), support[1]
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    pref = 0.5j / k
    image = _cquad(lambda t: np.exp(1j * k * t) * source_profile(t), a, b, rtol)
    out = np.empty(x_eval.shape, dtype=complex)
    for idx, x in np.ndenumerate(x_eval):
        left = _cquad(lambda t: np.exp(1j * k * (x - t)) * source_profile(t), a, min(x, b), rtol)
        right = _cquad(lambda t: np.exp(1j * k * (t - x)) * source_profile(t), max(x, a), b, rtol)
        out[idx] = pref * (left + right + np.exp(1j * k * x) * image)
    return out


@dataclass
class ModalField:
    """Axial amplitudes ``u_j(x)`` of the excited modes on a common grid."""

    x: np.ndarray
    amplitudes: Dict[int, np.ndarray]
    wavenumbers: Dict[int, complex]
    basis: ModalBasis

    def values(self, y) -> np.ndarray:
        """Field ``sum_j u_j(x) Phi_j(y)`` with shape ``(len(x), len(y))``."""
        y = np.asarray(y, dtype=float)
        total = np.zeros((len(self.x), len(y)), dtype=complex)
        for j, amp in self.amplitudes.items():
            total += np.outer(amp, self.basis.eigenfunctions[j](y))
        return total


def reference_field(
    sources: Sequence[SourceSpec], basis: ModalBasis, mu0: float, x_grid, rtol: float = GREEN_RTOL
) -> ModalField:
    """Superpose modal Green's solutions for Gaussian sources."""
    if isinstance(sources, SourceSpec):
        sources = [sources]
    x_grid = np.asarray(x_grid, dtype=float)
    amplitudes: Dict[int, np.ndarray] = {}
    wavenumbers: Dict[int, complex] = {}
    for src in sources:
        j = src.mode
        if j >= basis.n_modes:
            raise ValueError(f"source mode {j} not in basis")
        k = complex(axial_wavenumber(mu0, basis.eigenvalues[j]))
        half = 10.0 / np.sqrt(src.gamma)
        u = modal_green_solution(k, src.axial, x_grid, (src.x0 - half, src.x0 + half), rtol)
        amplitudes[j] = amplitudes.get(j, 0.0) + u
        wavenumbers[j] = k
    return ModalField(x_grid, amplitudes, wavenumbers, basis)


def project_modes(values, y, basis: ModalBasis) -> np.ndarray:
    """``int u(., y) Phi_j(y) sqrt(h) dy`` by the trapezoid rule on ``y``.

    ``values`` has ``y`` on its last axis; the result has the mode index
    first.
    """
    y = np.asarray(y, dtype=float)
    w = np.zeros_like(y)
    dy = np.diff(y)
    w[:-1] += 0.5 * dy
    w[1:] += 0.5 * dy
    w *= np.sqrt(basis.cross_section.h(y))
    phi = basis.evaluate(y)
    return np.tensordot(phi * w, np.asarray(values), axes=([1], [-1]))


def mode_amplitudes(
    a1, a2, x1: float, x2: float, k, min_sin: float = 0.1
) -> Tuple[np.ndarray, np.ndarray]:
    """Split modal amplitudes at two stations into ``exp(+ikx)`` and ``exp(-ikx)`` parts.

    ``a1``, ``a2`` are the mode amplitudes (one entry per ``k``) at ``x1 < x2``.
    Returns ``(c_plus, c_minus)``.
    """
    if not x2 > x1:
        raise StationError("stations must satisfy x1 < x2")
    a1, a2, k = (np.atleast_1d(np.asarray(v, dtype=complex)) for v in (a1, a2, k))
    c_plus = np.empty_like(k)
    c_minus = np.empty_like(k)
    dx = x2 - x1
    for j, kj in enumerate(k):
        if abs(kj.imag) < 1e-12 and abs(np.sin(kj.real * dx)) < min_sin:
            better = x1 + 0.5 * np.pi / kj.real
            raise StationError(f"stations {x1}, {x2} nearly degenerate for k={kj.real:.6g}; try x2={better:.6g}")
        M = np.array([[np.exp(1j * kj * x1), np.exp(-1j * kj * x1)], [np.exp(1j * kj * x2), np.exp(-1j * kj * x2)]])
        if np.linalg.cond(M) > 1e10:
            raise StationError(f"station pair ill-conditioned for k={kj}")
        c_plus[j], c_minus[j] = np.linalg.solve(M, [a1[j], a2[j]])
    return c_plus, c_minus
