import numpy as np
import pytest

from averseek import classical as cl
from averseek import stability as st
from averseek.ode import IntegratorConfig, integrate


def test_rhs_equilibrium_and_linear_spectrum():
    sys = st.quadratic_system(1, 1.0)
    assert np.allclose(st.damped_gradient_rhs(sys, [0.0, 0.0]), 0.0)
    # linear oscillator x'' + x' + x = 0
    traj = integrate(lambda s, t: st.damped_gradient_rhs(sys, s), [1.0, 0.0], 0.0, 5.0, IntegratorConfig.tight())
    w = np.sqrt(3) / 2
    t = traj.times
    exact = np.exp(-t / 2) * (np.cos(w * t) + np.sin(w * t) / (2 * w))
    assert np.max(np.abs(traj.states[:, 0] - exact)) < 1e-8


def test_energy_and_b_values():
    sys = st.quadratic_system(1, 1.0)
    assert st.energy(sys, [0.0], [0.0]) == 0.0
    assert st.b_function(sys, [0.0], [0.0]) == 0.0
    assert st.energy(sys, [1.0], [0.0]) == pytest.approx(0.5)
    assert st.b_function(sys, [1.0], [0.0]) == pytest.approx(1.5)


def test_b_block_eigenvalues():
    assert np.allclose(st.b_block_eigenvalues(1.0), [(3 - np.sqrt(5)) / 2, (3 + np.sqrt(5)) / 2])
    for k in (0.1, 1.0, 5.0):
        assert np.all(st.b_block_eigenvalues(k) > 0)


def test_dissipation_on_quadratic():
    sys = st.quadratic_system(2, 1.0)
    traj = integrate(
        lambda s, t: st.damped_gradient_rhs(sys, s), [1.0, -2.0, 0.5, 0.0], 0.0, 10.0, IntegratorConfig(mode="fixed", dt=1e-3)
    )
    rep = st.check_dissipation(sys, traj)
    assert rep.passed
    assert rep.max_energy_mismatch < 1e-6 and rep.max_b_mismatch < 1e-6


def test_rest_at_critical_point_has_zero_energy_rate():
    sys = st.quadratic_system(1, 1.0)
    traj = integrate(lambda s, t: st.damped_gradient_rhs(sys, s), [0.0, 0.0], 0.0, 1.0, IntegratorConfig(mode="fixed", dt=0.01))
    rep = st.check_dissipation(sys, traj)
    assert rep.max_energy_mismatch == 0.0 and rep.max_energy_rate == 0.0


def test_adaptive_trajectory_needs_spacing_and_enough_samples():
    sys = st.quadratic_system(1, 1.0)
    traj = integrate(lambda s, t: st.damped_gradient_rhs(sys, s), [1.0, 0.0], 0.0, 3.0)
    with pytest.raises(ValueError):
        st.check_dissipation(sys, traj)
    assert st.check_dissipation(sys, traj, h=1e-3).energy_ok is not None
    short = integrate(lambda s, t: st.damped_gradient_rhs(sys, s), [1.0, 0.0], 0.0, 0.02, IntegratorConfig(mode="fixed", dt=0.01))
    with pytest.raises(ValueError, match="coarse"):
        st.check_dissipation(sys, short)


def test_classical_heavy_ball_form_matches_averaged_rhs():
    gains = cl.ClassicalGains(0.01, 0.7, omega_L=1.4, K=0.6)
    obj = cl.AveragedObjective1D(cl.demo_psi, 0.7, cl.demo_dpsi)
    sys = st.classical_averaged_system(obj, gains, cl.demo_psi_bar_argmax(0.7))
    for th, dth in [(-1.0, 0.2), (0.5, -0.4), (1.7, 0.0)]:
        hb = st.damped_gradient_rhs(sys, [th, dth])
        av = cl.averaged_rhs(obj, gains, [th, dth, 10.0])
        assert np.allclose(hb, av[:2], atol=1e-12)
    assert sys.check_conditions(np.linspace(-2.5, 2.5, 51))


def test_probe_offsets_deterministic_and_bounded():
    a = st.probe_initial_offsets(2, 3.0, seed=7)
    b = st.probe_initial_offsets(2, 3.0, seed=7)
    assert len(a) == 16
    for (p1, v1), (p2, v2) in zip(a, b):
        assert np.array_equal(p1, p2) and np.array_equal(v1, v2)
        assert np.hypot(np.linalg.norm(p1), np.linalg.norm(v1)) <= 3.0 + 1e-12
    for p, v in a[:8]:
        assert np.linalg.norm(p) == pytest.approx(3.0) and not v.any()
    one = st.probe_initial_offsets(1, 2.0, seed=0, velocity_dim=2)
    assert abs(one[0][0][0]) == 2.0 and abs(one[1][0][0]) == 2.0 and one[0][1].shape == (2,)


def _linear_family(eps):
    sys = st.quadratic_system(1, 1.0)
    return st.ProbeSystem(
        rhs=lambda s, t: st.damped_gradient_rhs(sys, s),
        embed=lambda p, v: np.concatenate([p, v]),
        project=lambda S: S[:, :1],
        period=1.0,
        horizon=30.0,
        position_dim=1,
    )


def test_probe_passes_for_globally_stable_system():
    rep = st.sgpuas_probe(_linear_family, [0.0], r=2.0, delta=0.05, eps_list=[0.1, 0.01], jobs=2)
    assert rep.eps_passed == 0.1
    assert all(row.passed and row.n_runs == 64 for row in rep.rows)
    assert rep.envelope is not None and rep.envelope.lam > 0
    assert all(row.max_terminal_distance < 0.05 for row in rep.rows)


def test_probe_flags_short_horizon_and_rejects_increasing_eps():
    def short(eps):
        return st.ProbeSystem(**{**_linear_family(eps).__dict__, "horizon": 1.0})

    rep = st.sgpuas_probe(short, [0.0], r=2.0, delta=0.05, eps_list=[0.1])
    assert rep.eps_passed is None and rep.rows[0].failures
    with pytest.raises(ValueError):
        st.sgpuas_probe(_linear_family, [0.0], 1.0, 0.1, [0.01, 0.1])


def test_kl_envelope_validation():
    env = st.KLEnvelope(2.0, 0.5)
    assert env(1.0, 0.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        st.KLEnvelope(0.5, 1.0)
