"""Bilinear finite elements for the truncated layer problem.

The domain is ``[0, R] x [0, L_y]``.  The weak form is the unconjugated
bilinear form

    a(u, v) = int sqrt|g| (g^{-1} grad u) . grad v - mu0 sqrt|g| u v  dx dy

with the deformed tensor ``g`` sampled at Gauss points.  Neumann
conditions on ``x = 0`` and on the lateral sides are natural, which also
realizes the deformed co-normal condition inside the layer.  Nodes on
``x = R`` carry a homogeneous Dirichlet condition and are removed from the
system.

Nodes are numbered lexicographically with ``y`` running fastest, so the
matrix half-bandwidth is ``ny + 2`` and the Dirichlet nodes are the last
``ny + 1`` indices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .cross_section import ModalBasis, check_threshold, neumann_eigenpairs
from .errors import PreconditionError, ResourceError
from .geometry import MetricField
from .pml import PmlSpec, deformed_metric, validate_lambda
from .sparse import ComplexSparse

DEFAULT_NODE_BUDGET = 2_000_000


@dataclass(frozen=True)
class Mesh:
    R: float
    nx: int
    ny: int
    L_y: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def hx(self) -> float:
        return self.R / self.nx

    @property
    def hy(self) -> float:
        return self.L_y / self.ny

    @property
    def free_count(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.arange(self.free_count, self.n_nodes)

    def node_index(self, i, j):
        return np.asarray(i) * (self.ny + 1) + np.asarray(j)

    def grid(self, vec) -> np.ndarray:
        """Nodal vector reshaped to ``(nx + 1, ny + 1)``."""
        return full_vector(self, vec).reshape(self.nx + 1, self.ny + 1)


def build_mesh(
    R: float, nx_per_unit: int, ny: int, L_y: float = 1.0, node_budget: int = DEFAULT_NODE_BUDGET
) -> Mesh:
    """Uniform tensor grid with ``round(R * nx_per_unit)`` cells along the axis."""
    if not R > 0:
        raise PreconditionError(f"R must be positive, got {R}")
    if nx_per_unit < 4:
        raise PreconditionError(f"nx_per_unit must be >= 4, got {nx_per_unit}")
    if ny < 4:
        raise PreconditionError(f"ny must be >= 4, got {ny}")
    nx = int(round(R * nx_per_unit))
    n_nodes = (nx + 1) * (ny + 1)
    if n_nodes > node_budget:
        raise ResourceError(f"mesh needs {n_nodes} nodes, budget is {node_budget}")
    aspect = (R / nx) / (L_y / ny)
    if not 0.1 <= aspect <= 10.0:
        raise PreconditionError(f"element aspect ratio {aspect:.3g} outside [0.1, 10]")
    return Mesh(R, nx, ny, L_y, np.linspace(0.0, R, nx + 1), np.linspace(0.0, L_y, ny + 1))


def full_vector(mesh: Mesh, vec) -> np.ndarray:
    """Pad a free-node vector with the Dirichlet zeros (full vectors pass through)."""
    vec = np.asarray(vec)
    if vec.shape[0] == mesh.n_nodes:
        return vec
    if vec.shape[0] == mesh.free_count:
        out = np.zeros(mesh.n_nodes, dtype=np.result_type(vec, complex))
        out[: mesh.free_count] = vec
        return out
    raise ValueError(f"vector length {vec.shape[0]} matches neither {mesh.n_nodes} nor {mesh.free_count}")


# reference square [-1, 1]^2, local node order (i,j), (i+1,j), (i+1,j+1), (i,j+1)
_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _shape_tables(order: int):
    """Shape values and reference gradients, each shaped ``(4, q, q)``."""
    pts, _ = _gauss(order)
    xi = pts[:, None]
    eta = pts[None, :]
    sx = _CORNERS[:, 0][:, None, None]
    sy = _CORNERS[:, 1][:, None, None]
    N = 0.25 * (1 + sx * xi) * (1 + sy * eta)
    dxi = 0.25 * sx * (1 + sy * eta) * np.ones_like(xi)
    deta = 0.25 * sy * (1 + sx * xi) * np.ones_like(eta)
    return N, dxi, deta


def _quad_points(mesh: Mesh, order: int):
    """Physical Gauss points shaped for broadcasting over ``(nx, ny, q, q)``."""
    pts, wts = _gauss(order)
    X = mesh.x[:-1, None] + 0.5 * (1 + pts[None, :]) * mesh.hx
    Y = mesh.y[:-1, None] + 0.5 * (1 + pts[None, :]) * mesh.hy
    W = np.outer(wts, wts) * (0.25 * mesh.hx * mesh.hy)
    return X[:, None, :, None], Y[None, :, None, :], W


def _connectivity(mesh: Mesh) -> np.ndarray:
    i = np.arange(mesh.nx)[:, None]
    j = np.arange(mesh.ny)[None, :]
    n0 = mesh.node_index(i, j)
    stride = mesh.ny + 1
    return np.stack([n0, n0 + stride, n0 + stride + 1, n0 + 1], axis=-1)


@dataclass
class AssembledSystem:
    A: ComplexSparse
    mesh: Mesh
    field: MetricField
    spec: PmlSpec
    mu0: float
    quad_order: int
    # sqrt|g| at the assembly Gauss points, shape (nx, ny, q, q)
    mass_weight: np.ndarray = field(repr=False)
    dirichlet: bool = True

    @property
    def free_count(self) -> int:
        return self.A.n

    def expand(self, vec) -> np.ndarray:
        return full_vector(self.mesh, vec)


def _local_matrices(mesh: Mesh, field: MetricField, spec: PmlSpec, mu0: float, order: int):
    X, Y, W = _quad_points(mesh, order)
    g = deformed_metric(field, spec, X, Y)
    N, dxi, deta = _shape_tables(order)
    dx = dxi * (2.0 / mesh.hx)
    dy = deta * (2.0 / mesh.hy)
    sd = np.broadcast_to(g.sqrt_det, (mesh.nx, mesh.ny, order, order))
    c00 = sd * g.inv00 * W
    c01 = sd * g.inv01 * W
    c11 = sd * g.inv11 * W
    cm = -mu0 * sd * W
    Ke = (
        np.einsum("ijpq,apq,bpq->ijab", c00, dx, dx, optimize=True)
        + np.einsum("ijpq,apq,bpq->ijab", c01, dx, dy, optimize=True)
        + np.einsum("ijpq,apq,bpq->ijab", c01, dy, dx, optimize=True)
        + np.einsum("ijpq,apq,bpq->ijab", c11, dy, dy, optimize=True)
        + np.einsum("ijpq,apq,bpq->ijab", cm, N, N, optimize=True)
    )
    # exact symmetry of every local block makes the global matrix bitwise symmetric
    Ke = 0.5 * (Ke + np.swapaxes(Ke, -1, -2))
    return Ke, np.array(sd)


def assemble_system(
    mesh: Mesh,
    field: MetricField,
    spec: PmlSpec,
    mu0: float,
    quad_order: int = 2,
    dirichlet: bool = True,
    check_thresholds: bool = True,
) -> AssembledSystem:
    """Assemble ``stiffness - mu0 * mass`` for the deformed metric.

    With ``dirichlet=False`` the rows and columns of the ``x = R`` nodes are
    kept, and ``check_thresholds=False`` accepts ``mu0`` on a threshold;
    both are only useful for diagnostics.
    """
    validate_lambda(spec.lam, spec.alpha)
    if check_thresholds:
        check_threshold(mu0, _thresholds_for(field, mu0))
    Ke, sd = _local_matrices(mesh, field, spec, mu0, quad_order)
    conn = _connectivity(mesh)
    rows = np.broadcast_to(conn[..., :, None], Ke.shape).ravel()
    cols = np.broadcast_to(conn[..., None, :], Ke.shape).ravel()
    vals = Ke.ravel()
    n = mesh.n_nodes
    if dirichlet:
        n = mesh.free_count
        keep = (rows < n) & (cols < n)
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    A = ComplexSparse.from_coo(rows, cols, vals, n, symmetric=True)
    return AssembledSystem(A, mesh, field, spec, float(mu0), quad_order, sd, dirichlet)


def _thresholds_for(field: MetricField, mu0: float, count: int = 64):
    # flat limit metric for bent/stretched presets, exact thresholds for flat straight
    cs = field.cross_section
    if cs.flat:
        return (np.arange(count) * np.pi / cs.length) ** 2
    from .cross_section import neumann_eigenpairs

    return neumann_eigenpairs(cs, min(count, 16)).eigenvalues


@dataclass(frozen=True)
class SourceSpec:
    """``amplitude * exp(-gamma (x - x0)^2) * Phi_mode(y)``."""

    mode: int = 1
    x0: float = 3.0
    gamma: float = 4.0
    amplitude: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        if self.mode < 0:
            raise ValueError("mode index must be nonnegative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def support_end(self) -> float:
        """Right edge of the effective support ``x0 + 4 / sqrt(gamma)``."""
        return self.x0 + 4.0 / np.sqrt(self.gamma)

    def axial(self, z):
        """Axial profile; entire in ``z`` so it can be continued into the layer."""
        z = np.asarray(z)
        return self.amplitude * np.exp(-self.gamma * (z - self.x0) ** 2)


Sources = Union[SourceSpec, Sequence[SourceSpec]]


def _as_list(sources: Sources):
    return [sources] if isinstance(sources, SourceSpec) else list(sources)


def check_source_support(sources: Sources, spec: PmlSpec) -> bool:
    """Warn when a source reaches the layer; returns whether all are inside."""
    ok = True
    for src in _as_list(sources):
        if src.support_end >= spec.r:
            warnings.warn(
                f"source at x0={src.x0} (support to {src.support_end:.3g}) reaches the PML at r={spec.r}",
                stacklevel=3,
            )
            ok = False
    return ok


def source_values(sources: Sources, basis: ModalBasis, spec: Optional[PmlSpec], X, Y):
    """Source sum at points ``(X, Y)``, continued to ``x + lam s(x)`` when ``spec`` is given."""
    from .pml import profile_eval

    if spec is not None:
        s, _ = profile_eval(spec, X)
        Z = X + spec.lam * np.asarray(s)
    else:
        Z = X
    total = 0.0
    for src in _as_list(sources):
        if src.mode >= basis.n_modes:
            raise ValueError(f"source mode {src.mode} not in basis of {basis.n_modes} modes")
        total = total + src.axial(Z) * basis.eigenfunctions[src.mode](Y)
    return total


def assemble_rhs(system: AssembledSystem, sources: Sources, basis: ModalBasis, quad_order: int = 4) -> np.ndarray:
    """Load vector ``int sqrt|g| f_lam v`` on the free nodes.

    The load uses its own Gauss order (default 4 per direction) because the
    Gaussian profile is the only non-polynomial factor worth resolving.
    """
    check_source_support(sources, system.spec)
    mesh = system.mesh
    X, Y, W = _quad_points(mesh, quad_order)
    g = deformed_metric(system.field, system.spec, X, Y)
    f = source_values(sources, basis, system.spec, X, Y)
    integrand = np.broadcast_to(g.sqrt_det * f * W, (mesh.nx, mesh.ny, quad_order, quad_order))
    N, _, _ = _shape_tables(quad_order)
    local = np.einsum("ijpq,apq->ija", integrand, N)
    conn = _connectivity(mesh)
    n = mesh.n_nodes
    b = np.bincount(conn.ravel(), local.real.ravel(), minlength=n) + 1j * np.bincount(
        conn.ravel(), local.imag.ravel(), minlength=n
    )
    return b[: system.free_count]


def source_l2_norm(mesh: Mesh, sources: Sources, basis: ModalBasis, spec: Optional[PmlSpec] = None, order: int = 6):
    """Flat-measure ``L^2`` norm of the (continued) source on the mesh domain."""
    X, Y, W = _quad_points(mesh, order)
    f = np.broadcast_to(source_values(sources, basis, spec, X, Y), (mesh.nx, mesh.ny, order, order))
    return float(np.sqrt(np.sum(np.abs(f) ** 2 * W)))


def window_elements(mesh: Mesh, x_window) -> np.ndarray:
    a, b = x_window
    tol = 1e-9 * max(1.0, mesh.R)
    if a < -tol or b > mesh.R + tol or not b > a:
        raise PreconditionError(f"window {x_window} not inside [0, {mesh.R}]")
    mask = (mesh.x[:-1] >= a - tol) & (mesh.x[1:] <= b + tol)
    if not np.any(mask):
        raise PreconditionError(f"window {x_window} contains no whole element")
    return mask


def discrete_norms(mesh: Mesh, vec, x_window) -> tuple:
    """``(L2, H1-seminorm)`` of the bilinear interpolant on elements inside the window.

    Flat measure ``dx dy``; 2x2 Gauss integrates both exactly.
    """
    mask = window_elements(mesh, x_window)
    U = mesh.grid(vec)
    corners = np.stack([U[:-1, :-1], U[1:, :-1], U[1:, 1:], U[:-1, 1:]], axis=-1)[mask]
    N, dxi, deta = _shape_tables(2)
    _, wts = _gauss(2)
    W = np.outer(wts, wts) * (0.25 * mesh.hx * mesh.hy)
    u = np.einsum("eja,apq->ejpq", corners, N)
    ux = np.einsum("eja,apq->ejpq", corners, dxi) * (2.0 / mesh.hx)
    uy = np.einsum("eja,apq->ejpq", corners, deta) * (2.0 / mesh.hy)
    l2 = np.sqrt(np.sum(np.abs(u) ** 2 * W))
    h1 = np.sqrt(np.sum((np.abs(ux) ** 2 + np.abs(uy) ** 2) * W))
    return float(l2), float(h1)


def conormal_residual(system: AssembledSystem, vec) -> float:
    """Relative size of the deformed co-normal derivative on ``y = 0``.

    Strong-form diagnostic of the natural boundary condition
    ``g^{1m} d_m u = 0``, evaluated with one-sided differences at the
    midpoints of the bottom edges; it is only first-order accurate.
    """
    mesh = system.mesh
    U = mesh.grid(vec)
    xm = 0.5 * (mesh.x[:-1] + mesh.x[1:])
    g = deformed_metric(system.field, system.spec, xm, np.zeros_like(xm))
    ux = (U[1:, 0] - U[:-1, 0]) / mesh.hx
    uy = 0.5 * ((U[1:, 1] - U[1:, 0]) + (U[:-1, 1] - U[:-1, 0])) / mesh.hy
    flux = g.inv01 * ux + g.inv11 * uy
    Ux = np.diff(U, axis=0) / mesh.hx
    Uy = np.diff(U, axis=1) / mesh.hy
    scale = max(np.max(np.abs(Ux)), np.max(np.abs(Uy)), 1e-300)
    return float(np.max(np.abs(flux)) / scale)
