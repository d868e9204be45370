"""Metric presets on the strip ``[0, inf) x [0, L_y]``.

Each preset is the pullback ``J^T J`` of an explicit diffeomorphism of
the plane.  Coefficients are analytic in the axial variable and can be
evaluated at complex ``z`` inside the sector ``|arg z| < alpha``.

=========  ==========================================================
preset     map ``phi(x, y)``
=========  ==========================================================
straight   identity (with transverse metric ``h(y)``)
bent       ``(x, (x+3)^b a + (1 + (x+3)^g) y)``,  ``b < 1``, ``g < 0``
stretched  ``(int_0^x 1 + 1/log(t+4) dt, (1 + 1/log(x+5)) y)``
=========  ==========================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .cross_section import CrossSection
from .errors import DegeneracyError, DomainError

PRESETS = ("straight", "bent", "stretched")
DEFAULT_ALPHA = 0.45
DEGENERACY_TOL = 1e-10


def check_alpha(alpha: float) -> None:
    if not 0.0 < alpha:
        raise ValueError(f"sector half-angle must be positive, got {alpha}")
    if not np.sin(alpha) < 1.0 / np.sqrt(2.0):
        raise ValueError(f"sector half-angle {alpha} violates sin(alpha) < 1/sqrt(2)")


@dataclass(frozen=True)
class MetricField:
    preset: str = "straight"
    a: float = 1.0
    b_exp: float = 0.5
    g_exp: float = -1.0
    cross_section: CrossSection = field(default_factory=CrossSection)
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown metric preset {self.preset!r}; expected one of {PRESETS}")
        check_alpha(self.alpha)
        if self.preset == "bent":
            if not self.b_exp < 1:
                raise ValueError(f"bent preset needs b_exp < 1, got {self.b_exp}")
            if not self.g_exp < 0:
                raise ValueError(f"bent preset needs g_exp < 0, got {self.g_exp}")
        if self.preset != "straight" and not self.cross_section.flat:
            raise ValueError(f"{self.preset} preset is defined for the flat cross-section only")

    def h(self, y):
        return self.cross_section.h(y)

    def diffeomorphism(self, x: float, y: float):
        """Image ``phi(x, y)`` of a real point; used to cross-check the pullback."""
        if self.preset == "straight":
            return np.array([x, y], dtype=float)
        if self.preset == "bent":
            t = (x + 3.0) ** self.b_exp * self.a + (1.0 + (x + 3.0) ** self.g_exp) * y
            return np.array([x, t])
        s, _ = quad(lambda t: 1.0 + 1.0 / np.log(t + 4.0), 0.0, x, epsabs=1e-13, epsrel=1e-13)
        return np.array([s, (1.0 + 1.0 / np.log(x + 5.0)) * y])


@dataclass(frozen=True)
class MetricSample:
    """Complex symmetric 2x2 tensor ``[[g00, g01], [g01, g11]]`` (broadcast arrays)."""

    g00: np.ndarray
    g01: np.ndarray
    g11: np.ndarray
    det: np.ndarray
    inv00: np.ndarray
    inv01: np.ndarray
    inv11: np.ndarray
    sqrt_det: np.ndarray

    @classmethod
    def from_entries(cls, g00, g01, g11, tol: float = DEGENERACY_TOL) -> "MetricSample":
        g00, g01, g11 = np.broadcast_arrays(
            np.asarray(g00, dtype=complex), np.asarray(g01, dtype=complex), np.asarray(g11, dtype=complex)
        )
        det = g00 * g11 - g01 * g01
        if np.any(np.abs(det) < tol):
            raise DegeneracyError(f"metric determinant below {tol:g} (min |det| = {np.min(np.abs(det)):.3e})")
        return cls(
            g00=g00,
            g01=g01,
            g11=g11,
            det=det,
            inv00=g11 / det,
            inv01=-g01 / det,
            inv11=g00 / det,
            sqrt_det=np.sqrt(det),
        )

    def matrix(self) -> np.ndarray:
        return np.stack([np.stack([self.g00, self.g01], -1), np.stack([self.g01, self.g11], -1)], -2)

    def inverse(self) -> np.ndarray:
        return np.stack([np.stack([self.inv00, self.inv01], -1), np.stack([self.inv01, self.inv11], -1)], -2)


def in_sector(z, alpha: float) -> np.ndarray:
    """Points of the closed right half-plane that are real or satisfy ``|Im z| < tan(alpha) Re z``."""
    z = np.asarray(z, dtype=complex)
    real_axis = (z.imag == 0) & (z.real >= 0)
    return real_axis | ((z.real > 0) & (np.abs(z.imag) < np.tan(alpha) * z.real))


def _bent(field: MetricField, z, y):
    w = z + 3.0
    p = field.b_exp * w ** (field.b_exp - 1.0) * field.a + field.g_exp * w ** (field.g_exp - 1.0) * y
    q = 1.0 + w**field.g_exp
    return 1.0 + p * p, p * q, q * q


def _stretched(field: MetricField, z, y):
    u = 1.0 + 1.0 / np.log(z + 4.0)
    l5 = np.log(z + 5.0)
    v = 1.0 + 1.0 / l5
    p = -y / ((z + 5.0) * l5 * l5)
    return u * u + p * p, p * v, v * v


def metric_entries(field: MetricField, z, y):
    """Raw ``(g00, g01, g11)`` at complex ``z``; no sector or degeneracy checks."""
    z = np.asarray(z, dtype=complex)
    y = np.asarray(y, dtype=float)
    if field.preset == "straight":
        z, y = np.broadcast_arrays(z, y)
        return np.ones(z.shape, complex), np.zeros(z.shape, complex), field.h(y).astype(complex)
    if field.preset == "bent":
        return _bent(field, z, y)
    return _stretched(field, z, y)


def metric_eval(field: MetricField, z, y) -> MetricSample:
    """Metric coefficients at complex axial coordinate ``z`` and transverse ``y``."""
    z = np.asarray(z, dtype=complex)
    if field.preset != "straight":
        ok = in_sector(z, field.alpha)
        if not np.all(ok):
            bad = np.asarray(z)[~ok].ravel()[0]
            raise DomainError(f"z={bad} lies outside the analyticity sector |arg z| < {field.alpha}")
    return MetricSample.from_entries(*metric_entries(field, z, y))


@dataclass
class DecayReport:
    """Sup-deviations from the product metric, one row per radius."""

    radii: np.ndarray
    g00: np.ndarray
    g01: np.ndarray
    g11: np.ndarray
    # first-derivative deviations, filled only when requested
    derivatives: dict = field(default_factory=dict)

    def rows(self):
        for i, r in enumerate(self.radii):
            yield {"radius": r, "g00": self.g00[i], "g01": self.g01[i], "g11": self.g11[i]}

    def non_increasing(self, slack: float = 1e-12) -> bool:
        cols = (self.g00[1:], self.g01[1:], self.g11[1:])
        return all(np.all(np.diff(c) <= slack * (1.0 + np.abs(c[:-1]))) for c in cols)


def decay_report(
    field: MetricField,
    radii: Sequence[float],
    rays: Sequence[float],
    n_y: int = 21,
    derivatives: bool = False,
) -> DecayReport:
    """Sample ``|g00 - 1|``, ``|g01|``, ``|g11 - h|`` on circular arcs in the sector.

    With ``derivatives=True`` the complex z-derivative and the y-derivative
    of the same deviations are sampled as well (central differences).
    """
    radii = np.asarray(radii, dtype=float)
    rays = np.asarray(rays, dtype=float)
    if np.any(np.abs(rays) >= field.alpha):
        raise DomainError("ray angles must lie strictly inside (-alpha, alpha)")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    y = np.linspace(0.0, field.cross_section.length, n_y)
    zz, yy = np.broadcast_arrays(radii[:, None, None] * np.exp(1j * rays)[None, :, None], y[None, None, :])
    s = metric_eval(field, zz, yy)
    h = field.h(yy)
    axes = (1, 2)
    report = DecayReport(
        radii=radii,
        g00=np.max(np.abs(s.g00 - 1.0), axis=axes),
        g01=np.max(np.abs(s.g01), axis=axes),
        g11=np.max(np.abs(s.g11 - h), axis=axes),
    )
    if derivatives:
        dz = 1e-5 * np.maximum(1.0, radii)[:, None, None]
        hi = metric_entries(field, zz + dz, yy)
        lo = metric_entries(field, zz - dz, yy)
        dy = 1e-5
        hy = metric_entries(field, zz, yy + dy)
        ly = metric_entries(field, zz, yy - dy)
        dh = (field.h(yy + dy) - field.h(yy - dy)) / (2 * dy)
        for name, k in (("g00", 0), ("g01", 1), ("g11", 2)):
            report.derivatives["d_dz_" + name] = np.max(np.abs((hi[k] - lo[k]) / (2 * dz)), axis=axes)
            d_y = (hy[k] - ly[k]) / (2 * dy) - (dh if name == "g11" else 0.0)
            report.derivatives["d_dy_" + name] = np.max(np.abs(d_y), axis=axes)
    return report
