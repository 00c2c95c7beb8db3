"""Epsilon-indexed system families for the stability probe."""

from __future__ import annotations

import numpy as np

from .. import classical as cl
from .. import source as src
from ..boundary import circle_boundary
from ..stability import ProbeSystem, SgpuasReport, sgpuas_probe
from .config import SCHEMA_VERSION, ProbeConfig, parse_probe_config


def classical_family(params: dict, horizon_tau: float, cfg, theta_star: float):
    """Full classical loop in physical time; only the parameter estimate is observed.

    Offsets are taken in ``(theta_hat, xi, eta)`` relative to
    ``(theta_star, 0, z_bar(theta_star))``; the plant starts at its equilibrium.
    """
    plant = cl.demo_plant()
    z_star = cl.AveragedObjective1D(cl.demo_psi, params["a"], cl.demo_dpsi).z_bar(theta_star)

    def family(eps: float) -> ProbeSystem:
        gains = cl.ClassicalGains(eps, params["a"], params["omega_H"], params["omega_L"], params["K"])

        def embed(pos, vel):
            th = theta_star + float(pos[0])
            x = np.asarray(plant.l(th), dtype=float)
            return np.concatenate([x, [th, float(vel[0]), z_star + float(vel[1]), gains.a]])

        return ProbeSystem(
            rhs=lambda s, t: cl.closed_loop_rhs(plant, gains, s, t),
            embed=embed,
            project=lambda S: S[:, plant.n : plant.n + 1],
            period=2 * np.pi / eps,
            horizon=horizon_tau / eps,
            position_dim=1,
            cfg=cfg,
            velocity_dim=2,
        )

    return family


def source_family(params: dict, horizon: float, cfg, q_star=(0.0, 0.0)):
    """Moving-frame source loop; the moving-frame position is observed relative to ``q_star``."""
    b = circle_boundary(params["a"])
    q_star = np.asarray(q_star, dtype=float)

    def family(eps: float) -> ProbeSystem:
        p = src.SourceParams(params["m"], params["kappa"], params["c"], params["omega_H"], eps, params["mu"])
        if not p.mass_known:
            bb, p = src.rescale_for_unknown_mass(b, p)
        else:
            bb = b

        def embed(pos, vel):
            q = q_star + pos
            return np.concatenate([q, vel, [float(src.demo_signal(q))]])

        return ProbeSystem(
            rhs=lambda s, t: src.transformed_rhs(src.demo_signal, p, bb, s, t),
            embed=embed,
            project=lambda S: S[:, :2],
            period=bb.T * eps,
            horizon=horizon,
            position_dim=2,
            cfg=cfg,
        )

    return family


def default_target(pc: ProbeConfig) -> tuple[float, ...]:
    if pc.target is not None:
        return pc.target
    if pc.scheme == "classical":
        return (cl.demo_psi_bar_argmax(pc.parameters["a"]),)
    return (0.0, 0.0)


def run_probe(pc: ProbeConfig, jobs: int = 1) -> SgpuasReport:
    target = default_target(pc)
    if pc.scheme == "classical":
        family = classical_family(pc.parameters, pc.horizon, pc.integrator, target[0])
    else:
        family = source_family(pc.parameters, pc.horizon, pc.integrator, target)
    return sgpuas_probe(
        family, target, pc.r, pc.delta, list(pc.eps_list), pc.seed, pc.n_samples, jobs=jobs
    )


CLASSICAL_PROBE = {
    "schema_version": SCHEMA_VERSION,
    "name": "probe-classical",
    "scheme": "classical",
    "parameters": {"a": 0.7},
    "r": 2.0,
    "delta": 0.15,
    "eps_list": [0.01],
    "horizon": 150.0,
}

SOURCE_PROBE = {
    "schema_version": SCHEMA_VERSION,
    "name": "probe-source",
    "scheme": "source",
    "parameters": {"a": 0.5},
    "r": 10.0,
    "delta": 1.0,
    "eps_list": [0.1, 0.05],
    "horizon": 60.0,
}


def builtin_probe(which: str) -> ProbeConfig:
    return parse_probe_config({"classical": CLASSICAL_PROBE, "source": SOURCE_PROBE}[which])
