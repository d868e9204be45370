"""Scaling profile and complex-deformed metric of the layer.

Beyond ``x = r + 1`` the axial coordinate is replaced by
``z = x + lam * s(x)`` and the metric coefficient of ``dx^{2-k}`` picks up
the factor ``(1 + lam * s'(x))^{2-k}``.  For real ``lam`` this is the
pullback by the axial stretching ``x -> x + lam s(x)``; for ``Im lam > 0``
outgoing waves are damped inside the layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, LambdaError
from .geometry import DEFAULT_ALPHA, DEGENERACY_TOL, MetricField, MetricSample, metric_eval

INV_SQRT2 = 1.0 / np.sqrt(2.0)
PROFILES = ("cubic", "quintic")


@dataclass(frozen=True)
class LambdaStatus:
    lam: complex
    alpha: float
    absorbs: str  # "outgoing", "incoming" or "none"

    @property
    def disabled(self) -> bool:
        return self.lam == 0


def validate_lambda(lam: complex, alpha: float) -> LambdaStatus:
    """Check ``|lam| < sin(alpha) < 1/sqrt(2)``.

    Raises :class:`LambdaError` naming the violated inequality.  The
    returned status tells which waves the layer absorbs: ``Im lam > 0``
    damps outgoing (``exp(+ikx)``) waves, ``Im lam < 0`` incoming ones.
    """
    lam = complex(lam)
    sin_a = np.sin(alpha)
    if not sin_a < INV_SQRT2:
        raise LambdaError(f"sin(alpha) = {sin_a:.6g} violates sin(alpha) < 1/sqrt(2)")
    if not abs(lam) < sin_a:
        raise LambdaError(f"|lambda| = {abs(lam):.6g} violates |lambda| < sin(alpha) = {sin_a:.6g}")
    if lam.imag > 0:
        absorbs = "outgoing"
    elif lam.imag < 0:
        absorbs = "incoming"
    else:
        absorbs = "none"
    return LambdaStatus(lam, alpha, absorbs)


@dataclass(frozen=True)
class PmlSpec:
    """Layer start ``r``, ramp width ``w``, scaling ``lam``, sector half-angle ``alpha``.

    The profile vanishes for ``x <= r + 1`` and its slope ramps from 0 to 1
    on ``[r + 1, r + 1 + w]``.
    """

    r: float = 6.0
    w: float = 2.0
    lam: complex = 0.4j
    alpha: float = DEFAULT_ALPHA
    profile: str = "cubic"

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        validate_lambda(self.lam, self.alpha)
        if not self.r >= 1:
            raise ValueError(f"PML start r must be >= 1, got {self.r}")
        if not self.w > 0:
            raise ValueError(f"transition width w must be positive, got {self.w}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")

    @property
    def start(self) -> float:
        """Abscissa where the profile leaves zero."""
        return self.r + 1.0

    @property
    def full_strength(self) -> float:
        """Abscissa from which ``s' = 1``."""
        return self.r + 1.0 + self.w

    def with_lambda(self, lam: complex) -> "PmlSpec":
        return PmlSpec(self.r, self.w, lam, self.alpha, self.profile)


def profile_eval(spec: PmlSpec, x):
    """Return ``(s(x), s'(x))``.

    Cubic smoothstep slope ``3t^2 - 2t^3`` with ``t = (x - r - 1) / w``;
    ``s`` is its exact antiderivative, so ``s = x - r - 1 - w/2`` past the
    ramp.  The quintic variant uses ``6t^5 - 15t^4 + 10t^3``.
    """
    x = np.asarray(x, dtype=float)
    t = np.clip((x - spec.start) / spec.w, 0.0, 1.0)
    if spec.profile == "cubic":
        ds = t * t * (3.0 - 2.0 * t)
        s_ramp = spec.w * t**3 * (1.0 - 0.5 * t)
    else:
        ds = t**3 * (10.0 + t * (-15.0 + 6.0 * t))
        s_ramp = spec.w * t**4 * (2.5 + t * (-3.0 + t))
    s = np.where(x >= spec.full_strength, x - spec.start - 0.5 * spec.w, s_ramp)
    if s.ndim == 0:
        return float(s), float(ds)
    return s, ds


@dataclass(frozen=True)
class DeformedSample(MetricSample):
    s: np.ndarray
    s_prime: np.ndarray


def deformed_metric(field: MetricField, spec: PmlSpec, x, y) -> DeformedSample:
    """Deformed tensor ``(1 + lam s')^{2-k} g_k(x + lam s(x))`` at real ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    s, ds = profile_eval(spec, x)
    stretch = 1.0 + spec.lam * np.asarray(ds)
    if np.any(np.abs(stretch) <= 1.0 - INV_SQRT2):
        raise DegeneracyError("|1 + lam s'| fell below 1 - 1/sqrt(2)")
    base = metric_eval(field, x + spec.lam * np.asarray(s), y)
    g00 = stretch * stretch * base.g00
    g01 = stretch * base.g01
    sample = MetricSample.from_entries(g00, g01, base.g11, tol=DEGENERACY_TOL)
    return DeformedSample(**sample.__dict__, s=np.asarray(s), s_prime=np.asarray(ds))
