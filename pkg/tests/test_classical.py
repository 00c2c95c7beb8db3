import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from averseek import classical as cl
from averseek.averaging import periodic_average

GRID = np.linspace(-2, 2, 81)


def test_demo_plant_equilibria_and_steady_state_output():
    plant = cl.demo_plant()
    assert plant.check_equilibria(np.linspace(-3, 3, 13))
    assert np.allclose(plant.psi(GRID), cl.demo_psi(GRID))


def test_gradient_identity_constant_is_half():
    for a in (0.4, 0.7, 1.0):
        fit = cl.gradient_identity_residual(cl.demo_psi, a, GRID, cl.demo_dpsi)
        assert fit.C_fit == pytest.approx(0.5, abs=1e-12)
        assert fit.max_residual < 1e-12


def test_gradient_identity_without_derivative_uses_differences():
    fit = cl.gradient_identity_residual(cl.demo_psi, 0.7, GRID)
    assert fit.C_fit == pytest.approx(0.5, abs=1e-8)


def test_constant_objective_is_degenerate_but_consistent():
    fit = cl.gradient_identity_residual(lambda t: np.full(np.shape(t), 3.0), 0.5, GRID)
    assert np.isnan(fit.C_fit) and fit.max_residual == 0.0


def test_closed_form_matches_quadrature():
    for a in (0.4, 0.7, 1.0):
        obj = cl.AveragedObjective1D(cl.demo_psi, a)
        assert np.max(np.abs(cl.demo_psi_bar_closed_form(a, GRID) - obj.psi_bar(GRID))) < 1e-12


def test_critical_points_and_argmax():
    # a = 0.4 keeps a local maximum near -0.5; a = 0.7 has a single maximum near 0.8
    crit04 = cl.demo_psi_bar_critical_points(0.4)
    assert len(crit04) == 3 and crit04[0] == pytest.approx(-0.5, abs=0.05)
    crit07 = cl.demo_psi_bar_critical_points(0.7)
    assert len(crit07) == 1
    assert cl.demo_psi_bar_argmax(0.7) == pytest.approx(0.779, abs=1e-3)
    obj = cl.AveragedObjective1D(cl.demo_psi, 0.7, cl.demo_dpsi)
    assert obj.argmax(-2, 2) == pytest.approx(cl.demo_psi_bar_argmax(0.7), abs=1e-10)
    assert np.allclose(cl.AveragedObjective1D(cl.demo_psi, 0.4).critical_points(-2, 2), crit04, atol=1e-10)


def test_assumption3_pass_and_fail():
    grid = np.linspace(-3, 3, 601)
    good = cl.check_assumption3(cl.AveragedObjective1D(cl.demo_psi, 0.7, cl.demo_dpsi), cl.demo_psi_bar_argmax(0.7), grid)
    assert good.holds
    bad = cl.check_assumption3(cl.AveragedObjective1D(cl.demo_psi, 0.4, cl.demo_dpsi), cl.demo_psi_bar_argmax(0.4), grid)
    assert not bad.holds
    # violations fill the span between the persisting local maximum and the local minimum
    assert bad.violations.min() == pytest.approx(-0.5, abs=0.05)
    assert bad.violations.max() < 0.0


def test_reduced_system_averages_to_averaged_system():
    gains = cl.ClassicalGains(0.01, 0.7, omega_H=1.3, omega_L=0.8, K=2.0)
    obj = cl.AveragedObjective1D(cl.demo_psi, 0.7)
    for state in ([0.3, -0.2, 9.0], [-1.0, 0.5, 11.0]):
        avg = periodic_average(lambda taus: np.array([cl.reduced_rhs(cl.demo_psi, gains, state, t) for t in taus]), 2 * np.pi)
        assert np.allclose(avg, cl.averaged_rhs(obj, gains, state), atol=1e-12)


def test_time_scaled_rhs_is_physical_rhs_over_eps():
    plant = cl.demo_plant()
    gains = cl.ClassicalGains(0.05, 0.7)
    s = np.array([0.1, -0.2, 0.4, 0.3, 9.5, 0.7])
    tau = 1.3
    for decay in (False, True):
        lhs = cl.time_scaled_rhs(plant, gains, s, tau, decay)
        rhs = cl.closed_loop_rhs(plant, gains, s, tau / gains.eps, decay) / gains.eps
        assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)


def test_averaged_equilibrium_is_stationary():
    gains = cl.ClassicalGains(0.01, 0.7)
    obj = cl.AveragedObjective1D(cl.demo_psi, 0.7, cl.demo_dpsi)
    eq = cl.averaged_equilibrium(obj, cl.demo_psi_bar_argmax(0.7))
    assert np.max(np.abs(cl.averaged_rhs(obj, gains, eq))) < 1e-12


def test_state_vector_round_trip_and_initial():
    plant = cl.demo_plant()
    s = cl.ClassicalState.initial(plant, [0.0, 0.0], -1.0, 0.7)
    assert s.eta == pytest.approx(10.0)
    back = cl.ClassicalState.from_vector(s.to_vector(), 2)
    assert np.array_equal(back.to_vector(), s.to_vector())
    with pytest.raises(ValueError):
        cl.ClassicalState.from_vector(np.zeros(5), 2)


def test_gain_validation():
    with pytest.raises(ValueError):
        cl.ClassicalGains(0.0, 0.7)
    g = cl.ClassicalGains(0.1, 0.7, 2.0, 3.0, 4.0)
    assert (g.omega_h, g.omega_l, g.k) == pytest.approx((0.2, 0.3, 0.4))


@settings(max_examples=30, deadline=None)
@given(
    coeffs=st.lists(st.floats(-2, 2), min_size=5, max_size=5),
    a=st.floats(0.1, 1.5),
)
def test_gradient_identity_property_for_quartics(coeffs, a):
    poly = np.polynomial.Polynomial(coeffs)
    dpoly = poly.deriv()
    obj = cl.AveragedObjective1D(poly, a, dpoly)
    th = np.linspace(-1.5, 1.5, 13)
    lhs = np.asarray(obj.G_bar(th))
    rhs = 0.5 * a * a * np.asarray(obj.dpsi_bar(th))
    assert np.allclose(lhs, rhs, atol=1e-10 * max(1.0, np.max(np.abs(rhs))))
