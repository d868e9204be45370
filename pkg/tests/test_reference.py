import numpy as np
import pytest
from scipy.special import erf, erfc

from waveguide_pml.assembly import SourceSpec
from waveguide_pml.cross_section import CrossSection, neumann_eigenpairs
from waveguide_pml.errors import StationError, ThresholdError
from waveguide_pml.reference import modal_green_solution, mode_amplitudes, project_modes, reference_field


def gaussian_closed_form(k, x, x0=3.0, gamma=4.0):
    """Free kernel plus image for exp(-gamma (t - x0)^2), by completing the square.

    The Gaussian's mass on t < 0 is below 1e-15 for the parameters used here,
    so the half-line integrals are replaced by whole-line ones.
    """
    s = np.sqrt(gamma)
    base = np.sqrt(np.pi) / (2 * s) * np.exp(-(k**2) / (4 * gamma))
    c_minus = x0 - 1j * k / (2 * gamma)
    c_plus = x0 + 1j * k / (2 * gamma)
    left = np.exp(1j * k * (x - x0)) * base * (1 + erf(s * (x - c_minus)))
    right = np.exp(-1j * k * (x - x0)) * base * erfc(s * (x - c_plus))
    image = np.exp(1j * k * (x + x0)) * 2 * base
    return 0.5j / k * (left + right + image)


@pytest.mark.parametrize("k", [4.4721360, 3.1828283, 4.4134294j, 2.0 + 0.5j])
def test_green_matches_erf_closed_form(k):
    x = np.linspace(0, 8, 33)
    u = modal_green_solution(k, lambda t: np.exp(-4 * (t - 3) ** 2), x, support=(0, 13))
    ref = gaussian_closed_form(k, x)
    assert np.max(np.abs(u - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_narrow_source_far_field():
    k, gamma = 4.4721360, 400.0
    mass = np.sqrt(np.pi / gamma)
    x = np.linspace(5, 9, 9)
    u = modal_green_solution(k, lambda t: np.exp(-gamma * (t - 3) ** 2), x, support=(2, 4))
    # point source at x' = 3 together with its image in the wall
    point = 0.5j / k * mass * (np.exp(1j * k * (x - 3)) + np.exp(1j * k * (x + 3)))
    np.testing.assert_allclose(u, point, rtol=2e-2)
    # the remaining gap is the Gaussian's finite width: exp(-k^2 / (4 gamma))
    np.testing.assert_allclose(u, point * np.exp(-(k**2) / (4 * gamma)), rtol=1e-8)


def test_evanescent_decay_rate():
    k = 4.4134294j
    x = np.linspace(5, 8, 31)
    u = modal_green_solution(k, lambda t: np.exp(-4 * (t - 3) ** 2), x, support=(0, 6))
    slope = np.polyfit(x, np.log(np.abs(u)), 1)[0]
    assert slope == pytest.approx(-4.4134294, rel=1e-3)


@pytest.mark.parametrize("k", [4.4721360, 4.4134294j, 1.0 + 0.3j])
def test_neumann_wall(k):
    d = 1e-3
    f = lambda t: np.exp(-4 * (t - 3) ** 2)  # noqa: E731
    u = modal_green_solution(k, f, [0, d, 2 * d, 3 * d], support=(0, 13), rtol=1e-13)
    # third-order one-sided difference
    du0 = (-11 * u[0] + 18 * u[1] - 9 * u[2] + 2 * u[3]) / (6 * d)
    assert abs(du0) <= 1e-6


def test_greens_identity():
    k = 3.1828283
    f = lambda t: np.exp(-4 * (t - 3) ** 2)  # noqa: E731
    errs = []
    for h in (0.02, 0.01):
        x = np.arange(1.0, 5.0 + h / 2, h)
        u = modal_green_solution(k, f, x, support=(0, 13))
        lap = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
        resid = -lap - k**2 * u[1:-1] - f(x[1:-1])
        errs.append(np.max(np.abs(resid)))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)


def test_outgoing_phase_advances():
    k = 4.4721360
    x = np.linspace(6, 7, 101)
    u = modal_green_solution(k, lambda t: np.exp(-4 * (t - 3) ** 2), x, support=(0, 13))
    phase = np.unwrap(np.angle(u))
    np.testing.assert_allclose(np.gradient(phase, x), k, rtol=1e-6)


def test_threshold_rejected():
    with pytest.raises(ThresholdError):
        modal_green_solution(1e-9, lambda t: t, [1.0])
    with pytest.raises(ValueError):
        modal_green_solution(-1j, lambda t: t, [1.0])


def test_reference_field_separable(flat_basis):
    y = np.linspace(0, 1, 41)
    field = reference_field([SourceSpec(1, 3.0, 4.0)], flat_basis, 20.0, np.linspace(0, 5, 11))
    vals = field.values(y)
    profile = flat_basis.eigenfunctions[1](y)
    for row, amp in zip(vals, field.amplitudes[1]):
        np.testing.assert_allclose(row, amp * profile, atol=1e-15)


def test_projection_recovers_amplitudes(flat_basis):
    y = np.linspace(0, 1, 81)
    srcs = [SourceSpec(0, 3.0, 4.0), SourceSpec(1, 2.5, 6.0, 0.5j)]
    field = reference_field(srcs, flat_basis, 20.0, np.linspace(0, 5, 11))
    proj = project_modes(field.values(y), y, flat_basis)
    for j in (0, 1):
        np.testing.assert_allclose(proj[j], field.amplitudes[j], atol=1e-10 * np.max(np.abs(field.amplitudes[j])))
    assert np.max(np.abs(proj[2:])) < 1e-12


def test_parseval(flat_basis):
    y = np.linspace(0, 1, 401)
    x = np.linspace(0, 5, 51)
    srcs = [SourceSpec(0, 3.0, 4.0), SourceSpec(1, 3.0, 4.0)]
    field = reference_field(srcs, flat_basis, 20.0, x)
    w = np.full(len(y), y[1] - y[0])
    w[[0, -1]] *= 0.5
    total = np.sum(np.abs(field.values(y)) ** 2 * w, axis=1)
    parts = sum(np.abs(a) ** 2 for a in field.amplitudes.values())
    np.testing.assert_allclose(total, parts, rtol=1e-12)


def test_projection_with_weighted_cross_section():
    basis = neumann_eigenpairs(CrossSection(1.0, lambda y: 1 + 0.2 * y), 4)
    y = np.linspace(0, 1, 2001)
    vals = 2.0 * basis.eigenfunctions[2](y) - 1j * basis.eigenfunctions[0](y)
    proj = project_modes(vals, y, basis)
    np.testing.assert_allclose(proj, [-1j, 0, 2, 0], atol=1e-6)


@pytest.mark.parametrize("k", [4.4721360, 3.1828283])
def test_mode_amplitudes_pure_waves(k):
    x1, x2 = 5.5, 6.0
    out = lambda x: (0.7 - 0.2j) * np.exp(1j * k * x)  # noqa: E731
    cp, cm = mode_amplitudes(out(x1), out(x2), x1, x2, k)
    assert abs(cm[0]) <= 1e-10 and cp[0] == pytest.approx(0.7 - 0.2j, rel=1e-12)
    inc = lambda x: 1.3 * np.exp(-1j * k * x)  # noqa: E731
    cp, cm = mode_amplitudes(inc(x1), inc(x2), x1, x2, k)
    assert abs(cp[0]) <= 1e-10 and cm[0] == pytest.approx(1.3, rel=1e-12)


def test_mode_amplitudes_degenerate_stations():
    k = np.pi
    with pytest.raises(StationError, match="try x2"):
        mode_amplitudes(1.0, 1.0, 1.0, 2.0, k)
    with pytest.raises(StationError):
        mode_amplitudes(1.0, 1.0, 2.0, 1.0, k)
