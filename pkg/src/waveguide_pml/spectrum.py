"""Essential-spectrum curves of the layer operator conjugated with ``exp(beta s)``.

For each cross-section threshold ``nu`` the curve is

    mu(xi) = nu + (1 + lam)^{-2} (xi + i beta)^2,   xi real,

a ray from ``nu`` when ``beta = 0`` and a parabola otherwise.  Traversed
with increasing ``xi`` the parabola runs clockwise around its inner
region, which therefore lies on its right.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cross_section import ModalBasis
from .errors import RefinementError
from .geometry import DEFAULT_ALPHA
from .pml import validate_lambda

DEFAULT_SAMPLES = 4001
REFINEMENT_RTOL = 0.01


@dataclass(frozen=True)
class SpectrumCurves:
    lam: complex
    beta: float
    thresholds: np.ndarray
    xi: np.ndarray
    mu: np.ndarray  # shape (len(thresholds), len(xi))

    def conjugate(self) -> "SpectrumCurves":
        """Curves for ``conj(lam)``; conjugation reverses the direction of ``xi``."""
        return SpectrumCurves(np.conj(self.lam), self.beta, self.thresholds, self.xi, np.conj(self.mu[:, ::-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["nu", "xi", "mu_re", "mu_im"])
            for nu, row in zip(self.thresholds, self.mu):
                for xi, mu in zip(self.xi, row):
                    w.writerow([f"{nu:.17g}", f"{xi:.17g}", f"{mu.real:.17g}", f"{mu.imag:.17g}"])


def default_xi_max(mu0: complex, thresholds: Sequence[float]) -> float:
    return 3.0 * np.sqrt(abs(mu0) + float(np.max(thresholds)))


def _thresholds(basis_or_values) -> np.ndarray:
    if isinstance(basis_or_values, ModalBasis):
        return np.asarray(basis_or_values.eigenvalues, dtype=float)
    return np.asarray(basis_or_values, dtype=float)


def essential_curves(
    lam: complex, beta: float, basis, xi_max: float, samples: int = DEFAULT_SAMPLES, alpha: float = DEFAULT_ALPHA
) -> SpectrumCurves:
    """Sample ``nu_j + (1 + lam)^{-2} (xi + i beta)^2`` on ``[-xi_max, xi_max]``."""
    status = validate_lambda(lam, alpha)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    thresholds = _thresholds(basis)
    grid = np.linspace(-xi_max, xi_max, samples)
    xi = 0.5 * (grid - grid[::-1])  # exactly antisymmetric, so beta = 0 curves are exactly even
    c = (1.0 + status.lam) ** -2
    if status.lam == 0:
        # keep lam = 0, beta = 0 curves exactly on the real axis
        offset = (xi + 1j * beta) ** 2 if beta else (xi * xi).astype(complex)
    else:
        offset = c * (xi + 1j * beta) ** 2
    mu = thresholds[:, None] + offset[None, :]
    return SpectrumCurves(status.lam, float(beta), thresholds, xi, mu)


def _segment_geometry(mu0: complex, pts: np.ndarray):
    """Distance and side sign of ``mu0`` w.r.t. each polyline in ``pts`` (rows)."""
    a = pts[:, :-1]
    d = pts[:, 1:] - a
    len2 = np.abs(d) ** 2
    t = np.where(len2 > 0, ((mu0 - a) * np.conj(d)).real / np.where(len2 > 0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    foot = a + t * d
    dist = np.abs(mu0 - foot)
    idx = np.argmin(dist, axis=1)
    rows = np.arange(pts.shape[0])
    best = dist[rows, idx]
    cross = (np.conj(d[rows, idx]) * (mu0 - foot[rows, idx])).imag
    return best, np.sign(cross)


def _polyline_distance(mu0: complex, pts: np.ndarray) -> float:
    best, _ = _segment_geometry(mu0, pts)
    return float(np.min(best))


def spectral_distance(mu0: complex, curves: SpectrumCurves, check: bool = True) -> float:
    """Euclidean distance from ``mu0`` to the sampled curves (as polylines).

    With ``check=True`` the result is recomputed on every other sample and
    a :class:`RefinementError` is raised if the two differ by more than 1%.
    """
    mu0 = complex(mu0)
    dist = _polyline_distance(mu0, curves.mu)
    if check:
        coarse = _polyline_distance(mu0, curves.mu[:, ::2])
        scale = max(abs(mu0), 1.0)
        if abs(coarse - dist) > REFINEMENT_RTOL * max(dist, 1e-12 * scale):
            raise RefinementError(
                f"distance changes from {coarse:.6g} to {dist:.6g} under 2x refinement; sample more densely"
            )
    return dist


def encloses(mu0: complex, curves: SpectrumCurves) -> bool:
    """Whether ``mu0`` lies strictly inside one of the parabolas (never for ``beta = 0``)."""
    if curves.beta == 0:
        return False
    _, side = _segment_geometry(complex(mu0), curves.mu)
    return bool(np.any(side < 0))


def critical_beta(
    mu0: complex,
    lam: complex,
    basis,
    beta_hi: float = None,
    tol: float = 1e-4,
    samples: int = DEFAULT_SAMPLES,
) -> float:
    """Smallest ``beta`` whose parabolas reach ``mu0``, located by bisection.

    The inner regions grow monotonically with ``beta``, so the predicate
    "``mu0`` is enclosed" switches exactly once.
    """
    thresholds = _thresholds(basis)
    xi_max = default_xi_max(mu0, thresholds)
    hi = beta_hi if beta_hi is not None else 1.0
    while not encloses(mu0, essential_curves(lam, hi, thresholds, xi_max, samples)):
        hi *= 2.0
        if hi > 1e3:
            raise RefinementError("no enclosing beta found below 1e3")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if encloses(mu0, essential_curves(lam, mid, thresholds, xi_max, samples)):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
