import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import fixed_quad

from waveguide_pml.errors import LambdaError
from waveguide_pml.geometry import MetricField, metric_eval
from waveguide_pml.pml import PmlSpec, deformed_metric, profile_eval, validate_lambda

SPEC = PmlSpec(6.0, 2.0, 0.4j)
BENT = MetricField("bent")


def test_profile_examples():
    assert profile_eval(SPEC, 6.5) == (0.0, 0.0)
    s, sp = profile_eval(SPEC, 9.0)
    assert (s, sp) == pytest.approx((1.0, 1.0), abs=1e-15)
    assert profile_eval(SPEC, 8.0)[1] == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("profile", ["cubic", "quintic"])
@pytest.mark.parametrize("x", [6.9, 7.3, 8.0, 8.61, 9.0, 9.5, 14.0])
def test_profile_integral_identity(profile, x):
    spec = PmlSpec(6.0, 2.0, 0.4j, profile=profile)
    # s' is a polynomial on each piece, so 8-point Gauss-Legendre per piece is exact
    edges = [0.0] + [p for p in (spec.start, spec.full_strength) if p < x] + [x]
    val = sum(fixed_quad(lambda t: profile_eval(spec, t)[1], a, b, n=8)[0] for a, b in zip(edges, edges[1:]))
    assert abs(profile_eval(spec, x)[0] - val) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 30), st.floats(1, 10), st.floats(0.1, 5), st.sampled_from(["cubic", "quintic"]))
def test_profile_slope_bounds(x, r, w, profile):
    s, sp = profile_eval(PmlSpec(r, w, 0.3j, profile=profile), x)
    assert 0.0 <= sp <= 1.0
    assert s >= 0.0
    if x <= r + 1:
        assert s == 0.0 and sp == 0.0


@pytest.mark.parametrize("profile", ["cubic", "quintic"])
def test_profile_c2_and_monotone(profile):
    spec = PmlSpec(6.0, 2.0, 0.4j, profile=profile)
    x = np.linspace(6.5, 9.5, 30001)
    _, sp = profile_eval(spec, x)
    assert np.all(np.diff(sp) >= -1e-15)
    h = x[1] - x[0]
    spp = np.gradient(sp, h)
    # second derivative of s vanishes at both ends of the ramp, so s'' is continuous
    for edge in (spec.start, spec.full_strength):
        i = np.argmin(np.abs(x - edge))
        assert abs(spp[i]) < 1e-3


def test_validate_lambda_examples():
    st_ = validate_lambda(0.4j, 0.45)
    assert st_.absorbs == "outgoing"
    with pytest.raises(LambdaError, match=r"\|lambda\|"):
        validate_lambda(0.8, 0.45)
    off = validate_lambda(0, 0.45)
    assert off.disabled and off.absorbs == "none"
    assert validate_lambda(-0.4j, 0.45).absorbs == "incoming"
    with pytest.raises(LambdaError, match="sin"):
        validate_lambda(0.1j, 0.9)


def test_spec_invariants():
    with pytest.raises(ValueError):
        PmlSpec(0.5, 2.0, 0.4j)
    with pytest.raises(ValueError):
        PmlSpec(6.0, 0.0, 0.4j)
    with pytest.raises(LambdaError):
        PmlSpec(6.0, 2.0, 0.5j)


@pytest.mark.parametrize("field", [MetricField("straight"), BENT, MetricField("stretched")])
def test_zero_lambda_reproduces_metric(field):
    x = np.linspace(0, 14, 29)[:, None]
    y = np.linspace(0, 1, 5)[None, :]
    d = deformed_metric(field, PmlSpec(6.0, 2.0, 0.0), x, y)
    m = metric_eval(field, x, y)
    np.testing.assert_array_equal(np.broadcast_to(d.g00, m.g00.shape), np.broadcast_to(m.g00, m.g00.shape))
    np.testing.assert_array_equal(np.broadcast_to(d.g11, m.g11.shape), np.broadcast_to(m.g11, m.g11.shape))


@pytest.mark.parametrize("field", [MetricField("straight"), BENT, MetricField("stretched")])
def test_physical_region_untouched(field):
    x = np.linspace(0, 7, 15)[:, None]
    y = np.linspace(0, 1, 5)[None, :]
    d = deformed_metric(field, SPEC, x, y)
    m = metric_eval(field, x, y)
    np.testing.assert_array_equal(d.g01 * np.ones(m.g01.shape), m.g01 * np.ones(m.g01.shape))
    np.testing.assert_array_equal(d.g00 * np.ones(m.g00.shape), m.g00 * np.ones(m.g00.shape))


def test_straight_full_strength():
    d = deformed_metric(MetricField("straight"), SPEC, 10.0, 0.4)
    assert d.g00 == pytest.approx(0.84 + 0.8j, abs=1e-15)
    assert d.g01 == 0 and d.g11 == 1
    assert d.s_prime == 1.0


@pytest.mark.parametrize("lam", [0.35, -0.2, 0.1])
def test_real_lambda_is_coordinate_pullback(lam):
    spec = PmlSpec(6.0, 2.0, lam)
    for x in (7.5, 8.3, 11.0):
        s, sp = profile_eval(spec, x)
        d = deformed_metric(BENT, spec, x, 0.3)
        m = metric_eval(BENT, x + lam * s, 0.3)
        assert d.g00 == pytest.approx((1 + lam * sp) ** 2 * m.g00, rel=1e-14)
        assert d.g01 == pytest.approx((1 + lam * sp) * m.g01, rel=1e-14)
        assert d.g11 == pytest.approx(m.g11, rel=1e-14)


@pytest.mark.parametrize("field", [BENT, MetricField("stretched")])
@pytest.mark.parametrize("lam", [0.2j, 0.1 + 0.2j, -0.15 + 0.1j])
@pytest.mark.parametrize("x", [7.6, 8.5, 12.0])
def test_cauchy_riemann_in_lambda(field, lam, x):
    eps = 1e-6

    def entries(l):
        d = deformed_metric(field, PmlSpec(6.0, 2.0, l), x, 0.4)
        return np.array([d.g00, d.g01, d.g11, d.det])

    d_re = (entries(lam + eps) - entries(lam - eps)) / (2 * eps)
    d_im = (entries(lam + 1j * eps) - entries(lam - 1j * eps)) / (2j * eps)
    np.testing.assert_allclose(d_re, d_im, atol=1e-6)


def test_deformed_sample_invariants():
    d = deformed_metric(BENT, PmlSpec(6.0, 2.0, 0.3 + 0.2j), np.linspace(0, 20, 41), 0.5)
    assert np.all(np.abs(1 + (0.3 + 0.2j) * d.s_prime) > 1 - 1 / np.sqrt(2))
    assert np.all(np.abs(d.det) > 0)
