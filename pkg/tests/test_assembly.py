import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad

from waveguide_pml.assembly import (
    SourceSpec,
    assemble_rhs,
    assemble_system,
    build_mesh,
    conormal_residual,
    discrete_norms,
    full_vector,
)
from waveguide_pml.cross_section import CrossSection, neumann_eigenpairs
from waveguide_pml.errors import PreconditionError, ResourceError, ThresholdError
from waveguide_pml.geometry import MetricField
from waveguide_pml.pml import PmlSpec
from waveguide_pml.sparse import solve

STRAIGHT = MetricField("straight")
OFF = PmlSpec(6.0, 2.0, 0.0)
ON = PmlSpec(6.0, 2.0, 0.4j)


def test_mesh_counts():
    m = build_mesh(10, 4, 8, 1.0)
    assert (m.nx + 1, m.ny + 1) == (41, 9)
    assert m.n_nodes == 41 * 9
    assert len(m.dirichlet_nodes) == 9
    assert np.all(m.dirichlet_nodes >= m.free_count)
    m = build_mesh(14, 40, 40, 1.0)
    assert (m.nx + 1, m.ny + 1) == (561, 41)


@pytest.mark.parametrize("args", [(10, 2, 8), (10, 4, 3), (10, 4, 100), (10, 100, 4)])
def test_mesh_preconditions(args):
    with pytest.raises(PreconditionError):
        build_mesh(*args)


def test_mesh_budget():
    with pytest.raises(ResourceError):
        build_mesh(100, 40, 40, node_budget=10_000)


def _stiffness_mass(mesh, field=STRAIGHT, spec=OFF, dirichlet=True):
    K = assemble_system(mesh, field, spec, 0.0, dirichlet=dirichlet, check_thresholds=False).A.toarray()
    M = K - assemble_system(mesh, field, spec, 1.0, dirichlet=dirichlet, check_thresholds=False).A.toarray()
    return K, M


def test_constants_in_kernel_without_dirichlet():
    mesh = build_mesh(2, 4, 4)
    K, _ = _stiffness_mass(mesh, dirichlet=False)
    np.testing.assert_allclose(K.sum(axis=1), 0, atol=1e-13)


def test_positive_eigenvalues_with_dirichlet():
    mesh = build_mesh(2, 4, 4)  # 9 x 5 nodes
    assert (mesh.nx + 1, mesh.ny + 1) == (9, 5)
    sys0 = assemble_system(mesh, STRAIGHT, OFF, 0.0, check_thresholds=False)
    ev = np.linalg.eigvalsh(sys0.A.toarray().real)
    assert np.all(ev > 0)


def test_generalized_spectrum_matches_separable_oracle():
    """Q1 on a tensor grid separates: discrete eigenvalues are sums of 1-D linear-FEM ones."""
    mesh = build_mesh(2, 4, 4)
    K, M = _stiffness_mass(mesh)
    ev = np.sort(scipy.linalg.eigh(K.real, M.real, eigvals_only=True))

    def fem1d(theta, h):
        return 6 / h**2 * (1 - np.cos(theta)) / (2 + np.cos(theta))

    # Dirichlet at x = R, Neumann at x = 0: theta = (m + 1/2) pi hx / R
    lx = fem1d((np.arange(mesh.nx) + 0.5) * np.pi * mesh.hx / mesh.R, mesh.hx)
    ly = fem1d(np.arange(mesh.ny + 1) * np.pi * mesh.hy / mesh.L_y, mesh.hy)
    oracle = np.sort((lx[:, None] + ly[None, :]).ravel())
    np.testing.assert_allclose(ev, oracle, rtol=1e-10)
    # and the low end approximates the continuum values nu_j + ((m + 1/2) pi / R)^2
    assert ev[0] == pytest.approx((0.5 * np.pi / 2) ** 2, rel=0.05)


@pytest.mark.parametrize(
    "field",
    [STRAIGHT, MetricField("bent"), MetricField("stretched"),
     MetricField("straight", cross_section=CrossSection(1.0, lambda y: 1 + 0.2 * y))],
)
@pytest.mark.parametrize("lam", [0.0, 0.4j, 0.3 + 0.2j, -0.3j, 0.35])
def test_matrix_symmetry(field, lam):
    mesh = build_mesh(10, 6, 6)
    sys_ = assemble_system(mesh, field, PmlSpec(6.0, 2.0, lam), 20.0)
    assert sys_.A.asymmetry() <= 1e-13


@pytest.mark.parametrize("field", [STRAIGHT, MetricField("bent")])
def test_real_entries_without_layer(field):
    sys_ = assemble_system(build_mesh(10, 6, 6), field, OFF, 20.0)
    assert not np.any(sys_.A.csr.data.imag)


def test_assembly_deterministic():
    mesh = build_mesh(10, 8, 8)
    a = assemble_system(mesh, MetricField("bent"), ON, 20.0).A.csr
    b = assemble_system(mesh, MetricField("bent"), ON, 20.0).A.csr
    assert np.array_equal(a.data, b.data) and np.array_equal(a.indices, b.indices)


def test_threshold_rejected():
    with pytest.raises(ThresholdError):
        assemble_system(build_mesh(10, 4, 4), STRAIGHT, ON, np.pi**2)


def test_rhs_zero_amplitude(flat_basis):
    sys_ = assemble_system(build_mesh(10, 8, 8), STRAIGHT, ON, 20.0)
    b = assemble_rhs(sys_, SourceSpec(1, 3.0, 4.0, 0.0), flat_basis)
    assert not np.any(b)


def test_rhs_mode_zero_constant_in_y(flat_basis):
    mesh = build_mesh(10, 8, 8)
    sys_ = assemble_system(mesh, STRAIGHT, ON, 20.0)
    B = mesh.grid(assemble_rhs(sys_, SourceSpec(0, 3.0, 4.0), flat_basis))
    # interior rows are constant across y; wall rows carry half weight
    inner = B[:, 1:-1]
    np.testing.assert_allclose(inner, inner[:, :1] * np.ones_like(inner), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(B[:, 0], 0.5 * B[:, 1], rtol=1e-12, atol=1e-15)


def test_rhs_matches_quadrature_oracle(flat_basis):
    """Separable load: 1-D integrals of the Gaussian and of Phi_1 against hat functions."""
    mesh = build_mesh(10, 40, 20)
    sys_ = assemble_system(mesh, STRAIGHT, ON, 20.0)
    src = SourceSpec(1, 3.0, 4.0, 1.0 - 0.5j)
    b = mesh.grid(sys_.expand(assemble_rhs(sys_, src, flat_basis)))

    def hat_integrals(nodes, func):
        h = nodes[1] - nodes[0]
        out = np.zeros(len(nodes))
        for i, xi in enumerate(nodes):
            if i > 0:
                out[i] += quad(lambda t: func(t) * (t - nodes[i - 1]) / h, nodes[i - 1], xi, epsabs=1e-15, epsrel=1e-13)[0]
            if i < len(nodes) - 1:
                out[i] += quad(lambda t: func(t) * (nodes[i + 1] - t) / h, xi, nodes[i + 1], epsabs=1e-15, epsrel=1e-13)[0]
        return out

    ix = hat_integrals(mesh.x, lambda t: np.exp(-4.0 * (t - 3.0) ** 2))
    iy = hat_integrals(mesh.y, lambda t: np.sqrt(2) * np.cos(np.pi * t))
    oracle = (1.0 - 0.5j) * np.outer(ix, iy)
    oracle[-1] = 0.0  # Dirichlet column
    assert np.linalg.norm(b - oracle) / np.linalg.norm(oracle) <= 1e-8


def test_rhs_warns_when_source_reaches_layer(flat_basis):
    sys_ = assemble_system(build_mesh(10, 8, 8), STRAIGHT, ON, 20.0)
    with pytest.warns(UserWarning, match="reaches the PML"):
        assemble_rhs(sys_, SourceSpec(1, 5.5, 4.0), flat_basis)


def test_discrete_norm_examples():
    mesh = build_mesh(3, 20, 20)
    X, Y = np.meshgrid(mesh.x, mesh.y, indexing="ij")
    l2, h1 = discrete_norms(mesh, np.ones(mesh.n_nodes), (0, 1))
    assert (l2, h1) == pytest.approx((1.0, 0.0), abs=1e-14)
    _, h1 = discrete_norms(mesh, X.ravel(), (0, 1))
    assert h1 == pytest.approx(1.0, abs=1e-13)
    l2, _ = discrete_norms(mesh, np.cos(np.pi * Y).ravel(), (0, 1))
    assert l2 == pytest.approx(1 / np.sqrt(2), rel=5e-3)


def test_discrete_norms_window_checks():
    mesh = build_mesh(3, 8, 8)
    with pytest.raises(PreconditionError):
        discrete_norms(mesh, np.ones(mesh.n_nodes), (0, 4))
    with pytest.raises(PreconditionError):
        discrete_norms(mesh, np.ones(mesh.n_nodes), (1.01, 1.05))


def test_full_vector_pads_dirichlet():
    mesh = build_mesh(2, 4, 4)
    v = full_vector(mesh, np.arange(mesh.free_count, dtype=complex))
    assert v.shape == (mesh.n_nodes,) and np.all(v[mesh.free_count:] == 0)


def _norm_for(order, n):
    mesh = build_mesh(10, n, n)
    field = MetricField("bent")
    basis = neumann_eigenpairs(field.cross_section, 8)
    sys_ = assemble_system(mesh, field, ON, 20.0, quad_order=order)
    u = sys_.expand(solve(sys_.A, assemble_rhs(sys_, SourceSpec(1, 3.0, 4.0), basis)).x)
    return discrete_norms(mesh, u, (0, 10))[0]


def test_quadrature_refinement_is_second_order():
    d_coarse = abs(_norm_for(2, 10) - _norm_for(3, 10))
    d_fine = abs(_norm_for(2, 20) - _norm_for(3, 20))
    assert d_fine < d_coarse / 2.5


def test_conormal_residual_decreases(flat_basis):
    vals = []
    for n in (10, 20, 40):
        mesh = build_mesh(10, n, n)
        sys_ = assemble_system(mesh, MetricField("bent"), ON, 20.0)
        u = solve(sys_.A, assemble_rhs(sys_, SourceSpec(1, 3.0, 4.0), flat_basis)).x
        vals.append(conormal_residual(sys_, u))
    assert vals[2] < vals[1] < vals[0]
