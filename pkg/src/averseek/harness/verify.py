"""Identity battery shared by the ``verify`` subcommand and the acceptance suite."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import classical as cl
from .. import source as src
from .. import stability as st
from ..boundary import circle_boundary
from ..ode import IntegratorConfig, integrate, uniform_grid, resample

THETA_GRID = np.round(np.arange(-200, 201) * 0.01, 12)
PAPER_START = (-9.0, 7.0)


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.3e} (threshold {self.threshold:.0e}, {self.seconds:.1f}s)"

    def as_dict(self):
        return self.__dict__.copy()


def gradient_identity_gap(amplitudes=(0.4, 0.7, 1.0)) -> float:
    worst = 0.0
    for a in amplitudes:
        obj = cl.AveragedObjective1D(cl.demo_psi, a, cl.demo_dpsi)
        gap = np.abs(obj.G_bar(THETA_GRID) - 0.5 * a * a * np.asarray(obj.dpsi_bar(THETA_GRID)))
        worst = max(worst, float(gap.max()))
    return worst


def closed_form_gap(amplitudes=(0.4, 0.7, 1.0)) -> float:
    worst = 0.0
    for a in amplitudes:
        obj = cl.AveragedObjective1D(cl.demo_psi, a, cl.demo_dpsi)
        gap = np.abs(cl.demo_psi_bar_closed_form(a, THETA_GRID) - obj.psi_bar(THETA_GRID))
        worst = max(worst, float(gap.max()))
    return worst


def divergence_gap(step: float = 0.5) -> float:
    obj = src.AveragedObjective2D.for_disk(src.demo_signal, 1.0)
    axis = np.arange(-10, 10 + step / 2, step)
    Q = np.array([(x, y) for x in axis for y in axis])
    return src.divergence_identity_residual(obj, Q, 1.0)


def disk_force_gap(n: int = 1000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for a in (0.5, 1.0):
        b = circle_boundary(a)
        p = src.SourceParams(eps=0.1)
        for y, eta, t in zip(rng.uniform(-50, 50, n), rng.uniform(-50, 50, n), rng.uniform(0, 100, n)):
            general = src.control_force(p, b, y, eta, t)
            disk = src.disk_force(a, p.m, p.c, p.eps, y, eta, t)
            scale = max(np.linalg.norm(disk), 1e-300)
            worst = max(worst, float(np.linalg.norm(general - disk) / scale))
    return worst


def round_trip_gap(n: int = 200, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    p = src.SourceParams(eps=0.1)
    b = circle_boundary(1.0)
    worst = 0.0
    for _ in range(n):
        s = rng.uniform(-20, 20, 5)
        t = rng.uniform(0, 50)
        back = src.from_transformed(src.to_transformed(s, p, b, t), p, b, t)
        worst = max(worst, float(np.max(np.abs(back - s) / np.maximum(1.0, np.abs(s)))))
    return worst


def transform_consistency_gap(tol: float = 1e-11, horizon: float = 40.0) -> float:
    """Sup gap between the direct loop and the mapped moving-frame loop."""
    p = src.SourceParams(eps=0.1)
    b = circle_boundary(1.0)
    s0 = src.initial_physical(PAPER_START)
    cfg = IntegratorConfig(rtol=tol, atol=tol)
    direct = src.simulate_closed_loop(src.demo_signal, p, b, s0, horizon, cfg)
    moving = src.to_physical(src.simulate_transformed(src.demo_signal, p, b, s0, horizon, cfg), p, b)
    grid = uniform_grid(0.0, horizon, 8001)
    return float(np.max(np.abs(resample(direct, grid).states - resample(moving, grid).states)))


def fig4_averaged_trajectory(dt: float = 5e-3, horizon: float = 60.0):
    p = src.SourceParams(eps=0.1)
    b = circle_boundary(1.0)
    obj = src.AveragedObjective2D.for_disk(src.demo_signal, 1.0)
    sys = st.source_averaged_system(obj, p, (0.0, 0.0), 6.0)
    z0 = src.to_transformed(src.initial_physical(PAPER_START), p, b, 0.0)[:4]
    traj = integrate(
        lambda s, t: st.damped_gradient_rhs(sys, s), z0, 0.0, horizon, IntegratorConfig(mode="fixed", dt=dt)
    )
    return sys, traj


def dissipation_reports():
    quad = st.quadratic_system(1, 1.0)
    traj = integrate(
        lambda s, t: st.damped_gradient_rhs(quad, s), [1.0, 0.0], 0.0, 20.0, IntegratorConfig(mode="fixed", dt=1e-3)
    )
    sys, ftraj = fig4_averaged_trajectory()
    return st.check_dissipation(quad, traj), st.check_dissipation(sys, ftraj)


def unknown_mass_gap(n: int = 200, seed: int = 2) -> float:
    """Force felt with the wrong mass equals the force of the rescaled design."""
    rng = np.random.default_rng(seed)
    b = circle_boundary(1.0)
    p = src.SourceParams(m=2.0, eps=0.1, mu=1.3)
    b2, p2 = src.rescale_for_unknown_mass(b, p)
    worst = 0.0
    for _ in range(n):
        s = rng.uniform(-5, 5, 5)
        t = rng.uniform(0, 20)
        d1 = src.closed_loop_rhs(src.demo_signal, p, b, s, t)
        d2 = src.closed_loop_rhs(src.demo_signal, p2, b2, s, t)
        worst = max(worst, float(np.max(np.abs(d1 - d2) / np.maximum(1.0, np.abs(d1)))))
    return worst


def battery(tol: float | None = None) -> list[CheckResult]:
    checks: list[tuple[str, Callable[[], float], float]] = [
        ("gradient identity (1-D)", gradient_identity_gap, 1e-10),
        ("closed-form average (1-D)", closed_form_gap, 1e-11),
        ("divergence identity (2-D)", divergence_gap, 1e-5),
        ("disk force equality (relative)", disk_force_gap, 1e-12),
        ("transform round trip (relative)", round_trip_gap, 1e-12),
        ("unknown-mass rescaling (relative)", unknown_mass_gap, 1e-12),
        ("transform consistency", lambda: transform_consistency_gap(tol or 1e-11), 1e-5),
    ]
    out = []
    for name, fn, thr in checks:
        t0 = time.perf_counter()
        v = fn()
        out.append(CheckResult(name, v, thr, bool(v < thr), time.perf_counter() - t0))
    t0 = time.perf_counter()
    quad, fig4 = dissipation_reports()
    dt = time.perf_counter() - t0
    for label, rep in (("quadratic", quad), ("fig4-right averaged", fig4)):
        worst = max(rep.max_energy_mismatch, rep.max_b_mismatch)
        out.append(CheckResult(f"dissipation {label}", worst, rep.tol, rep.passed, dt / 2))
    return out
