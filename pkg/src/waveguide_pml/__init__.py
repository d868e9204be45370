"""Complex-scaled absorbing layers for waveguides with quasicylindrical ends.

Finite-element solver for the Helmholtz problem with a perfectly matched
layer built from a complex deformation of the metric, together with a
modal reference solution, essential-spectrum geometry and a study harness.
"""

from .assembly import SourceSpec, assemble_rhs, assemble_system, build_mesh
from .cross_section import CrossSection, ModalBasis, axial_wavenumber, beta_max, neumann_eigenpairs
from .errors import *  # noqa: F401,F403
from .geometry import MetricField, metric_eval
from .harness import StudyConfig, StudyReport, solve_finite_pml
from .pml import PmlSpec, deformed_metric, profile_eval, validate_lambda
from .reference import modal_green_solution, mode_amplitudes, reference_field
from .spectrum import critical_beta, essential_curves, spectral_distance
from .sparse import IMPLEMENTATION as KERNEL

__version__ = "0.1.0"

__all__ = [
    "CrossSection",
    "KERNEL",
    "MetricField",
    "ModalBasis",
    "PmlSpec",
    "SourceSpec",
    "StudyConfig",
    "StudyReport",
    "assemble_rhs",
    "assemble_system",
    "axial_wavenumber",
    "beta_max",
    "build_mesh",
    "critical_beta",
    "deformed_metric",
    "essential_curves",
    "metric_eval",
    "modal_green_solution",
    "mode_amplitudes",
    "neumann_eigenpairs",
    "profile_eval",
    "reference_field",
    "solve_finite_pml",
    "spectral_distance",
    "validate_lambda",
]
