import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from averseek.averaging import (
    QuadratureError,
    boundary_flux,
    boundary_mean,
    disk_rule,
    fd_gradient,
    gauss_chebyshev2_rule,
    mapped_rule,
    periodic_average,
    region_average,
    semicircle_average,
)
from averseek.boundary import circle_boundary, ellipse_boundary


def test_periodic_average_of_trig_polynomials():
    T = 2 * np.pi
    assert periodic_average(lambda t: np.sin(t) ** 2, T) == pytest.approx(0.5, abs=1e-15)
    assert abs(periodic_average(lambda t: np.sin(3 * t), T)) < 1e-15
    v = periodic_average(lambda t: np.column_stack([np.cos(t) ** 2, np.ones_like(t)]), T)
    assert np.allclose(v, [0.5, 1.0])


def test_semicircle_moments():
    rule = gauss_chebyshev2_rule(64)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert rule.nodes**2 @ rule.weights == pytest.approx(0.25, abs=1e-15)
    assert rule.nodes**4 @ rule.weights == pytest.approx(0.125, abs=1e-15)
    assert abs(rule.nodes**3 @ rule.weights) < 1e-15


def test_semicircle_average_vectorized():
    th = np.array([-1.0, 0.0, 2.0])
    out = semicircle_average(lambda x: x**2, th, 0.5)
    assert np.allclose(out, th**2 + 0.25 * 0.25)
    with pytest.raises(ValueError):
        semicircle_average(lambda x: x, 0.0, 0.0)


def test_disk_rule_area_and_moments():
    rule = disk_rule(1.0)
    assert rule.weights.sum() == pytest.approx(np.pi, abs=1e-13)
    w = rule.weights / rule.weights.sum()
    assert (rule.nodes**2).sum(axis=1) @ w == pytest.approx(0.5, abs=1e-14)
    assert np.allclose(rule.nodes.T @ w, 0.0, atol=1e-15)


def test_region_average_batch_matches_single():
    rule = disk_rule(0.7, 16, 32)
    f = lambda p: np.cos(p[..., 0]) * np.exp(p[..., 1])  # noqa: E731
    Q = np.array([[0.0, 0.0], [1.0, -2.0], [3.0, 0.5]])
    batch = region_average(f, Q, rule, chunk=2)
    single = [region_average(f, q, rule) for q in Q]
    assert np.allclose(batch, single, rtol=0, atol=1e-15)


def test_mapped_rule_gives_ellipse_area():
    rule = mapped_rule(disk_rule(1.0), [[2.0, 0.0], [0.0, 0.5]])
    assert rule.weights.sum() == pytest.approx(np.pi)
    assert rule.kind == "user-region"


def test_constant_field_has_zero_flux():
    b = circle_boundary(1.0)
    flux = boundary_flux(lambda p: np.full(p.shape[:-1], 3.0), np.array([1.0, 2.0]), b)
    assert np.max(np.abs(flux)) < 1e-14


def test_linear_field_flux_equals_gradient():
    # divergence theorem for psi = g.p on any region: flux/area = g
    g = np.array([0.3, -1.7])
    for b in (circle_boundary(0.8), ellipse_boundary(1.5, 0.4)):
        flux = boundary_flux(lambda p: p @ g, np.array([2.0, -1.0]), b)
        assert np.allclose(flux, g, atol=1e-12)


def test_boundary_mean_and_fd_gradient():
    b = circle_boundary(1.0)
    assert boundary_mean(lambda p: (p**2).sum(-1), np.zeros(2), b) == pytest.approx(1.0)
    grad = fd_gradient(lambda q: (q**2).sum(-1), np.array([[1.0, 2.0]]))
    assert np.allclose(grad, [[2.0, 4.0]], atol=1e-8)


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        region_average(lambda p: np.full(p.shape[:-1], np.nan), np.zeros(2), disk_rule(1.0, 4, 8))


@settings(max_examples=30, deadline=None)
@given(
    c=st.lists(st.floats(-3, 3), min_size=6, max_size=6),
    q=st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    a=st.floats(0.2, 2.0),
)
def test_quadratic_divergence_identity_property(c, q, a):
    # psi quadratic: flux/area equals the gradient of the disk average exactly
    def psi(p):
        x, y = p[..., 0], p[..., 1]
        return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y

    q = np.array(q)
    b = circle_boundary(a)
    flux = boundary_flux(psi, q, b)
    grad = np.array([c[1] + 2 * c[3] * q[0] + c[4] * q[1], c[2] + c[4] * q[0] + 2 * c[5] * q[1]])
    assert np.allclose(flux, grad, atol=1e-10)
