"""Neumann spectrum of the waveguide cross-section.

The cross-section is the interval ``[0, L_y]`` carrying the metric
``h(y) dy^2``.  Its Neumann Laplacian is

    -h^{-1/2} d/dy ( h^{-1/2} d/dy )

and the eigenfunctions are orthonormal in ``L^2(sqrt(h) dy)``, the volume
induced by that metric.  For ``h == 1`` everything is closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InsufficientModesError, InvalidCrossSectionError, ThresholdError

THRESHOLD_TOL = 1e-8
DEFAULT_GRID_NODES = 2001


@dataclass(frozen=True)
class CrossSection:
    """Interval ``[0, length]`` with transverse metric coefficient ``weight``.

    ``weight=None`` means the flat metric ``h == 1``.
    """

    length: float = 1.0
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grid_nodes: int = DEFAULT_GRID_NODES

    def __post_init__(self):
        if not self.length > 0:
            raise InvalidCrossSectionError(f"cross-section length must be positive, got {self.length}")
        if self.grid_nodes < 3:
            raise InvalidCrossSectionError("grid_nodes must be at least 3")
        if self.weight is not None:
            y = np.linspace(0.0, self.length, self.grid_nodes)
            h = np.asarray(self.weight(y), dtype=float) * np.ones_like(y)
            if not np.all(np.isfinite(h)) or np.min(h) <= 0:
                raise InvalidCrossSectionError("weight profile must be finite and strictly positive on [0, L_y]")

    @property
    def flat(self) -> bool:
        return self.weight is None

    def h(self, y):
        """Transverse metric coefficient at ``y`` (broadcasts)."""
        y = np.asarray(y, dtype=float)
        if self.weight is None:
            return np.ones_like(y)
        return np.asarray(self.weight(y), dtype=float) * np.ones_like(y)


def _flat_mode(j: int, length: float, y):
    y = np.asarray(y, dtype=float)
    if j == 0:
        return np.full_like(y, 1.0 / np.sqrt(length))
    return np.sqrt(2.0 / length) * np.cos(j * np.pi * y / length)


def _grid_mode(grid: np.ndarray, values: np.ndarray, y):
    return np.interp(np.asarray(y, dtype=float), grid, values)


@dataclass(frozen=True)
class ModalBasis:
    """First ``n_modes`` Neumann eigenpairs, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenfunctions: tuple
    cross_section: CrossSection
    # nodal data of the finite-difference solve (None in the flat case)
    grid: Optional[np.ndarray] = field(default=None, repr=False)
    nodal: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    def evaluate(self, y) -> np.ndarray:
        """Array of shape ``(n_modes,) + y.shape`` with ``Phi_j(y)``."""
        return np.stack([phi(y) for phi in self.eigenfunctions])

    def gram(self) -> np.ndarray:
        """Matrix of ``int Phi_i Phi_j sqrt(h) dy``.

        The flat case uses high-order Gauss-Legendre quadrature; the
        finite-difference case uses the trapezoid rule on its own grid,
        which is the inner product the discrete eigenvectors are
        orthonormal in.
        """
        cs = self.cross_section
        if self.grid is None:
            nodes, weights = np.polynomial.legendre.leggauss(max(64, 4 * self.n_modes))
            y = 0.5 * cs.length * (nodes + 1.0)
            w = 0.5 * cs.length * weights
            phi = self.evaluate(y)
            return (phi * w) @ phi.T
        w = _trapezoid_weights(self.grid) * np.sqrt(cs.h(self.grid))
        return (self.nodal * w) @ self.nodal.T


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    dy = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * dy
    w[1:] += 0.5 * dy
    return w


def _sturm_liouville(cs: CrossSection, n: int):
    """Second-order finite differences with Neumann ghost points.

    Eliminating the ghost nodes gives the symmetric pencil
    ``K phi = nu M phi`` with ``M`` diagonal (trapezoid weights times
    ``sqrt(h)``), which is reduced to a symmetric tridiagonal problem.
    """
    grid = np.linspace(0.0, cs.length, cs.grid_nodes)
    dy = grid[1] - grid[0]
    if n > cs.grid_nodes:
        raise InsufficientModesError(f"requested {n} modes from a {cs.grid_nodes}-node grid")
    stiff_coef = 1.0 / np.sqrt(cs.h(0.5 * (grid[1:] + grid[:-1])))
    mass = _trapezoid_weights(grid) * np.sqrt(cs.h(grid))

    k_diag = np.zeros_like(grid)
    k_diag[:-1] += stiff_coef / dy
    k_diag[1:] += stiff_coef / dy
    k_off = -stiff_coef / dy

    scale = 1.0 / np.sqrt(mass)
    d = k_diag * scale**2
    e = k_off * scale[:-1] * scale[1:]
    nu, psi = eigh_tridiagonal(d, e, select="i", select_range=(0, n - 1))
    phi = (psi * scale[:, None]).T
    # sign convention of the closed-form cosines: Phi_j(0) > 0
    phi *= np.where(phi[:, 0] < 0, -1.0, 1.0)[:, None]
    nu = nu.copy()
    if abs(nu[0]) < 1e-9 * max(1.0, abs(nu[-1])):
        nu[0] = 0.0
    return grid, nu, phi


def neumann_eigenpairs(cs: CrossSection, n: int) -> ModalBasis:
    """First ``n`` Neumann eigenpairs of the cross-section."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if cs.flat:
        j = np.arange(n)
        nu = (j * np.pi / cs.length) ** 2
        funcs = tuple(partial(_flat_mode, int(jj), cs.length) for jj in j)
        return ModalBasis(nu, funcs, cs)
    grid, nu, phi = _sturm_liouville(cs, n)
    funcs = tuple(partial(_grid_mode, grid, phi[jj]) for jj in range(n))
    return ModalBasis(nu, funcs, cs, grid=grid, nodal=phi)


def check_threshold(mu0: float, thresholds: Sequence[float], tol: float = THRESHOLD_TOL) -> None:
    gap = np.min(np.abs(np.asarray(thresholds, dtype=float) - mu0))
    if gap < tol:
        raise ThresholdError(f"mu0={mu0!r} lies within {tol:g} of a cross-section eigenvalue")


def axial_wavenumber(mu0, nu):
    """Principal root ``sqrt(mu0 - nu)`` with ``Im k >= 0``.

    Real positive for propagating channels, positive imaginary for
    evanescent ones.  Broadcasts over array arguments.
    """
    diff = np.asarray(mu0, dtype=complex) - np.asarray(nu, dtype=float)
    if np.any(np.abs(diff) < THRESHOLD_TOL):
        raise ThresholdError(f"mu0 coincides with threshold nu (|mu0 - nu| < {THRESHOLD_TOL:g})")
    k = np.sqrt(diff)
    # sqrt of a negative real with a signed-zero imaginary part can land on -i
    k = np.where(k.imag < 0, -k, k)
    return k[()] if k.ndim == 0 else k


def beta_max(mu0: float, lam: complex, basis: ModalBasis) -> float:
    """Largest admissible decay rate in the PML for the channels of ``basis``.

    Minimum over thresholds of ``|Im((1 + lam) k_j)|``.  Past ``mu0`` the
    channel contribution ``(1 + Re lam) sqrt(nu - mu0)`` grows with ``nu``,
    so the scan stops at the first evanescent channel.
    """
    check_threshold(mu0, basis.eigenvalues)
    best = np.inf
    for nu in basis.eigenvalues:
        contrib = abs(((1.0 + lam) * axial_wavenumber(mu0, nu)).imag)
        best = min(best, contrib)
        if nu > mu0:
            return float(best)
    raise InsufficientModesError(
        f"all {basis.n_modes} thresholds lie below mu0={mu0}; add modes to certify the minimum"
    )
