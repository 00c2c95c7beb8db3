import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from averseek import source as src
from averseek.boundary import circle_boundary, ellipse_boundary


@pytest.fixture
def unit():
    return src.SourceParams(eps=0.1), circle_boundary(1.0)


def test_moving_frame_initial_state(unit):
    p, b = unit
    z = src.to_transformed(src.initial_physical((-9.0, 7.0)), p, b, 0.0)
    assert np.allclose(z, [-10.0, 6.9, 1.0, -10.0, 0.0], atol=1e-14)


def test_round_trip(unit):
    p, b = unit
    s = np.array([1.0, -2.0, 0.3, 0.4, 5.0])
    assert np.allclose(src.from_transformed(src.to_transformed(s, p, b, 2.1), p, b, 2.1), s, atol=1e-14)


def test_disk_force_matches_general_force(unit):
    p, b = unit
    for y, eta, t in [(3.0, 1.0, 0.0), (-2.0, 5.0, 1.7), (0.0, 0.0, 13.0)]:
        assert np.allclose(src.control_force(p, b, y, eta, t), src.disk_force(1.0, p.m, p.c, p.eps, y, eta, t), rtol=1e-13)


def test_transformed_rhs_is_time_derivative_of_transform(unit):
    # d/dt T(s(t), t) computed by finite differences along the physical flow
    p, b = unit
    rng = np.random.default_rng(3)
    for _ in range(5):
        s = rng.uniform(-3, 3, 5)
        t = rng.uniform(0, 5)
        sd = src.closed_loop_rhs(src.demo_signal, p, b, s, t)
        h = 1e-6
        fd = (src.to_transformed(s + h * sd, p, b, t + h) - src.to_transformed(s - h * sd, p, b, t - h)) / (2 * h)
        exact = src.transformed_rhs(src.demo_signal, p, b, src.to_transformed(s, p, b, t), t)
        assert np.allclose(fd, exact, rtol=1e-6, atol=1e-5)


def test_unknown_mass_rescaling_preserves_force():
    b = circle_boundary(0.8)
    p = src.SourceParams(m=1.5, c=2.0, eps=0.1, mu=0.9)
    b2, p2 = src.rescale_for_unknown_mass(b, p)
    assert p2.mass_known and p2.c == pytest.approx(2.0 * 0.9 / 1.5)
    for t in (0.0, 0.37, 2.0):
        assert np.allclose(src.control_force(p, b, 4.0, 1.0, t), src.control_force(p2, b2, 4.0, 1.0, t), rtol=1e-13)
    with pytest.raises(ValueError):
        src.to_transformed(np.zeros(5), p, b, 0.0)


def test_origin_is_averaged_equilibrium():
    obj = src.AveragedObjective2D.for_disk(src.demo_signal, 1.0)
    p = src.SourceParams()
    eq = np.array([0.0, 0.0, 0.0, 0.0, obj.z_bar(np.zeros(2))])
    assert np.max(np.abs(src.averaged_rhs(obj, p, eq))) < 1e-12


def test_flux_and_mean_matches_separate_evaluation():
    obj = src.AveragedObjective2D(src.demo_signal, ellipse_boundary(1.2, 0.6))
    q = np.array([1.3, -2.2])
    G, z = obj.flux_and_mean(q, 1.7)
    assert np.allclose(G, obj.G_bar(q, 1.7), atol=1e-15)
    assert z == pytest.approx(obj.z_bar(q), abs=1e-15)


def test_divergence_identity_on_coarse_grid():
    obj = src.AveragedObjective2D.for_disk(src.demo_signal, 1.0)
    xs = np.arange(-6.0, 6.1, 3.0)
    Q = np.array([(x, y) for x in xs for y in xs])
    assert src.divergence_identity_residual(obj, Q, 1.0) < 1e-6


def test_assumption4_point_grid_detects_critical_point_for_small_radius():
    small = src.AveragedObjective2D.for_disk(src.demo_signal, 0.5)
    rep = src.check_assumption4(small, (0.0, 0.0), (np.arange(-4, 4.01, 0.25), np.arange(-4, 4.01, 0.25)), 6.0)
    assert not rep.condition_ii


def test_terminal_period_mean():
    from averseek.ode import IntegratorConfig, integrate

    traj = integrate(lambda x, t: np.array([np.cos(t), 1.0]), [0.0, 0.0], 0.0, 10.0, IntegratorConfig.tight())
    m = src.terminal_period_mean(traj, 2 * np.pi, cols=(0,))
    assert m[0] == pytest.approx(np.mean(np.sin(10 - 2 * np.pi + 2 * np.pi * np.arange(1, 257) / 256)), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    s=st.lists(st.floats(-50, 50), min_size=5, max_size=5),
    t=st.floats(0, 100),
    a=st.floats(0.2, 3.0),
)
def test_round_trip_property(s, t, a):
    p = src.SourceParams(eps=0.1, kappa=1.3, m=0.7)
    b = circle_boundary(a)
    s = np.array(s)
    back = src.from_transformed(src.to_transformed(s, p, b, t), p, b, t)
    assert np.allclose(back, s, rtol=1e-12, atol=1e-12)
