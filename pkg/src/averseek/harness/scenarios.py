"""Scenario execution, built-in figure setups and parameter sweeps."""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import classical as cl
from .. import source as src
from .. import stability as st
from ..averaging import gauss_chebyshev2_rule, region_average
from ..boundary import circle_boundary
from ..ode import IntegratorConfig, Trajectory, integrate, resample, uniform_grid
from .config import SCHEMA_VERSION, ConfigError, ScenarioConfig, parse_config
from .io import write_csv, write_json

SOURCE_START = (-9.0, 7.0)
CLASSICAL_THETA0 = -1.0


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    columns: list[str]
    table: np.ndarray
    summary: dict[str, Any]
    identity: dict[str, Any] | None = None
    extra_tables: dict[str, tuple[list[str], np.ndarray]] = field(default_factory=dict)


# classical schemes

def _psi_bar_rows(theta, a, n=64):
    rule = gauss_chebyshev2_rule(n)
    theta = np.asarray(theta, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), theta.shape)
    return cl.demo_psi(theta[:, None] + a[:, None] * rule.nodes) @ rule.weights


def _global_maximizer_demo() -> float:
    roots = np.roots([-4.0, 8 / 5, 12 / 5, 0.0]).real
    return float(roots[np.argmax(cl.demo_psi(roots))])


def _classical_initial(cfg, plant, a):
    init = cfg.initial_state
    if init is None:
        return cl.ClassicalState.initial(plant, [0.0, 0.0], CLASSICAL_THETA0, a).to_vector()
    if len(init) == 3:
        return cl.ClassicalState.initial(plant, init[:2], init[2], a).to_vector()
    if len(init) == 6:
        return np.array(init, dtype=float)
    raise ConfigError("classical initial_state takes [x1, x2, theta_hat] or the full 6-vector")


def _run_classical(cfg: ScenarioConfig, decay: bool) -> ScenarioResult:
    p = cfg.parameters
    gains = cl.ClassicalGains(p["eps"], p["a"], p["omega_H"], p["omega_L"], p["K"])
    plant = cl.demo_plant()
    s0 = _classical_initial(cfg, plant, gains.a)
    t1 = cfg.horizon / gains.eps
    traj = integrate(
        lambda s, t: cl.closed_loop_rhs(plant, gains, s, t, decay),
        s0,
        0.0,
        t1,
        cfg.integrator,
        {"scheme": cfg.scheme},
    )
    tau = uniform_grid(0.0, cfg.horizon, cfg.samples)
    tgrid = tau / gains.eps
    tgrid[-1] = t1
    R = resample(traj, tgrid).states
    y = np.asarray(plant.h(R[:, :2]))
    psi_bar = _psi_bar_rows(R[:, 2], R[:, 5])
    table = np.column_stack([tgrid, tau, R, y, psi_bar])
    columns = ["t", "tau", "x1", "x2", "theta_hat", "xi", "eta", "a", "y", "psi_bar"]

    window = min(2 * np.pi / gains.eps, t1)
    last = resample(traj, t1 - window * (1 - np.arange(256) / 256)).states
    a_final = float(traj.final[5])
    theta_avg_star = cl.demo_psi_bar_argmax(a_final)
    target = _global_maximizer_demo() if decay else theta_avg_star
    theta_T = float(traj.final[2])
    summary = {
        "scheme": cfg.scheme,
        "terminal_state": traj.final,
        "terminal_theta_hat": theta_T,
        "terminal_amplitude": a_final,
        "period_mean_theta_hat": float(last[:, 2].mean()),
        "theta_target": target,
        "psi_bar_argmax_at_terminal_amplitude": theta_avg_star,
        "terminal_distance": abs(theta_T - target),
        "n_steps": len(traj) - 1,
    }
    return ScenarioResult(cfg, columns, table, summary)


def _run_averaged_classical(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.parameters
    gains = cl.ClassicalGains(p["eps"], p["a"], p["omega_H"], p["omega_L"], p["K"])
    obj = cl.AveragedObjective1D(cl.demo_psi, gains.a, cl.demo_dpsi)
    init = cfg.initial_state or (CLASSICAL_THETA0, 0.0, float(cl.demo_psi(0.0)))
    if len(init) != 3:
        raise ConfigError("averaged-classical initial_state is [theta, theta_dot, eta]")
    traj = integrate(lambda s, t: cl.averaged_rhs(obj, gains, s), init, 0.0, cfg.horizon, cfg.integrator)
    tau = uniform_grid(0.0, cfg.horizon, cfg.samples)
    R = resample(traj, tau).states
    table = np.column_stack([tau, R, obj.psi_bar(R[:, 0])])
    target = cl.demo_psi_bar_argmax(gains.a)
    summary = {
        "scheme": cfg.scheme,
        "terminal_state": traj.final,
        "terminal_theta_bar": float(traj.final[0]),
        "theta_target": target,
        "terminal_distance": abs(float(traj.final[0]) - target),
        "n_steps": len(traj) - 1,
    }
    return ScenarioResult(cfg, ["tau", "theta_bar", "theta_bar_dot", "eta_bar", "psi_bar"], table, summary)


# source schemes

def _source_setup(cfg: ScenarioConfig):
    p = cfg.parameters
    params = src.SourceParams(p["m"], p["kappa"], p["c"], p["omega_H"], p["eps"], p["mu"])
    b = circle_boundary(p["a"])
    init = cfg.initial_state
    if init is None:
        s0 = src.initial_physical(SOURCE_START)
    elif len(init) == 2:
        s0 = src.initial_physical(init)
    elif len(init) == 5:
        s0 = np.array(init, dtype=float)
    else:
        raise ConfigError("source initial_state takes [q1, q2] or [q1, q2, q1', q2', eta]")
    return params, b, s0


def _moving_frame(params, b):
    if params.mass_known:
        return params, b
    b2, p2 = src.rescale_for_unknown_mass(b, params)
    return p2, b2


def _source_summary(cfg, params, b, phys_last, transformed, t1, averaged_ref=None):
    pm, bm = _moving_frame(params, b)
    q_mean = phys_last[:, :2].mean(axis=0)
    q_T = phys_last[-1, :2]
    z0 = transformed.states[0]
    v0 = z0[2:4]
    drift = np.array([1.0, -10.0])
    summary = {
        "scheme": cfg.scheme,
        "terminal_state": phys_last[-1],
        "terminal_q": q_T,
        "terminal_abs_q": float(np.linalg.norm(q_T)),
        "period_mean_q": q_mean,
        "period_mean_abs_q": float(np.linalg.norm(q_mean)),
        "final_period_max_abs_q": float(np.max(np.linalg.norm(phys_last[:, :2], axis=1))),
        "initial_transformed_velocity": v0,
        "initial_drift_cosine": float(v0 @ drift / (np.linalg.norm(v0) * np.linalg.norm(drift)))
        if np.linalg.norm(v0) > 0
        else 0.0,
        "n_steps": len(transformed) - 1,
    }
    if averaged_ref is not None:
        grid = uniform_grid(transformed.times[0], t1, 4001)
        A = resample(averaged_ref, grid).states
        T = resample(transformed, grid).states
        summary["averaged_gap"] = float(np.max(np.linalg.norm(A[:, :2] - T[:, :2], axis=1)))
    return summary


def _last_period(traj: Trajectory, period: float, n: int = 256) -> np.ndarray:
    t1 = traj.times[-1]
    period = min(period, t1 - traj.times[0])
    grid = t1 - period + period * np.arange(1, n + 1) / n
    return grid, resample(traj, grid).states


def _run_source(cfg: ScenarioConfig) -> ScenarioResult:
    params, b, s0 = _source_setup(cfg)
    t1 = cfg.horizon
    period = b.T * params.eps
    averaged_ref = None
    pm, bm = _moving_frame(params, b)
    if cfg.scheme == "source":
        traj = src.simulate_closed_loop(src.demo_signal, params, b, s0, t1, cfg.integrator)
        grid = uniform_grid(0.0, t1, cfg.samples)
        R = resample(traj, grid).states
        _, last = _last_period(traj, period)
        transformed_states = np.array([src.to_transformed(s, pm, bm, t) for s, t in zip(R, grid)])
        transformed = Trajectory(grid, transformed_states)
        table = np.column_stack([grid, R, src.demo_signal(R[:, :2])])
        columns = ["t", "q1", "q2", "qd1", "qd2", "eta", "y"]
    else:
        traj = src.simulate_transformed(src.demo_signal, pm, bm, s0, t1, cfg.integrator)
        transformed = traj
        grid = uniform_grid(0.0, t1, cfg.samples)
        Z = resample(traj, grid).states
        dq, dv = src.frame_offset(pm, bm, grid)
        R = Z.copy()
        R[:, :2] += dq
        R[:, 2:4] += dv
        lg, Zl = _last_period(traj, period)
        ldq, ldv = src.frame_offset(pm, bm, lg)
        last = Zl.copy()
        last[:, :2] += ldq
        last[:, 2:4] += ldv
        table = np.column_stack([grid, R, Z[:, :4], src.demo_signal(R[:, :2])])
        columns = ["t", "q1", "q2", "qd1", "qd2", "eta", "qt1", "qt2", "qtd1", "qtd2", "y"]
    if cfg.parameters["compare_averaged"]:
        obj = src.AveragedObjective2D(src.demo_signal, bm)
        averaged_ref = src.simulate_averaged(
            obj, pm, transformed.states[0], t1, IntegratorConfig(rtol=1e-10, atol=1e-10)
        )
    summary = _source_summary(cfg, params, b, last, transformed, t1, averaged_ref)
    return ScenarioResult(cfg, columns, table, summary)


def _run_averaged_source(cfg: ScenarioConfig) -> ScenarioResult:
    params, b, s0 = _source_setup(cfg)
    pm, bm = _moving_frame(params, b)
    z0 = src.to_transformed(s0, pm, bm, 0.0)
    obj = src.AveragedObjective2D.for_disk(src.demo_signal, bm.area ** 0.5 / math.sqrt(math.pi))
    traj = src.simulate_averaged(obj, pm, z0, cfg.horizon, cfg.integrator)
    grid = uniform_grid(0.0, cfg.horizon, cfg.samples)
    R = resample(traj, grid).states
    table = np.column_stack([grid, R, obj.psi_bar(R[:, :2])])
    qT = traj.final[:2]
    summary = {
        "scheme": cfg.scheme,
        "initial_state": z0,
        "terminal_state": traj.final,
        "terminal_q": qT,
        "terminal_abs_q": float(np.linalg.norm(qT)),
        "n_steps": len(traj) - 1,
    }
    return ScenarioResult(cfg, ["t", "q1", "q2", "qd1", "qd2", "eta", "psi_bar"], table, summary)


# generic heavy-ball system

def lyapunov_system_for(cfg: ScenarioConfig):
    p = cfg.parameters
    kind = p["potential"]
    if kind == "quadratic":
        init = cfg.initial_state or (1.0, 0.0)
        if len(init) % 2:
            raise ConfigError("lyapunov initial_state is [x..., v...]")
        return st.quadratic_system(len(init) // 2, p["k"]), np.array(init, dtype=float)
    if kind == "classical-averaged":
        gains = cl.ClassicalGains(p["eps"], p["a"], omega_L=p["k"], K=1.0)
        obj = cl.AveragedObjective1D(cl.demo_psi, p["a"], cl.demo_dpsi)
        init = cfg.initial_state or (CLASSICAL_THETA0, 0.0)
        return st.classical_averaged_system(obj, gains, cl.demo_psi_bar_argmax(p["a"])), np.array(init, dtype=float)
    params = src.SourceParams(kappa=p["k"], eps=p["eps"])
    b = circle_boundary(p["a"])
    obj = src.AveragedObjective2D.for_disk(src.demo_signal, p["a"])
    if cfg.initial_state is None:
        init = src.to_transformed(src.initial_physical(SOURCE_START), params, b, 0.0)[:4]
    else:
        init = np.array(cfg.initial_state, dtype=float)
    return st.source_averaged_system(obj, params, (0.0, 0.0), p["C_radius"]), init


def _run_lyapunov(cfg: ScenarioConfig) -> ScenarioResult:
    sys, x0 = lyapunov_system_for(cfg)
    if len(x0) != 2 * sys.n:
        raise ConfigError(f"lyapunov initial_state needs {2 * sys.n} entries")
    traj = integrate(lambda s, t: st.damped_gradient_rhs(sys, s), x0, 0.0, cfg.horizon, cfg.integrator)
    h = cfg.parameters["fd_step"]
    uniform = st._uniform(traj.times) and abs(np.diff(traj.times).mean() - h) < 1e-12
    report = st.check_dissipation(sys, traj, None if uniform else h)
    grid = uniform_grid(0.0, cfg.horizon, cfg.samples)
    R = resample(traj, grid).states
    X, V = R[:, : sys.n], R[:, sys.n :]
    pot = np.asarray(sys.V(X), dtype=float)
    table = np.column_stack([grid, R, st.energy(sys, X, V, pot), st.b_function(sys, X, V, pot)])
    xcols = [f"x{i + 1}" for i in range(sys.n)]
    vcols = [f"v{i + 1}" for i in range(sys.n)]
    summary = {
        "scheme": cfg.scheme,
        "potential": cfg.parameters["potential"],
        "terminal_state": traj.final,
        "terminal_distance": float(np.linalg.norm(traj.final[: sys.n] - sys.x_star)),
        "dissipation": report.summary(),
        "n_steps": len(traj) - 1,
    }
    return ScenarioResult(cfg, ["t", *xcols, *vcols, "E", "B"], table, summary)


def identity_report(cfg: ScenarioConfig) -> dict[str, Any]:
    """Quick scheme-specific identity checks attached to a scenario run."""
    p = cfg.parameters
    out: dict[str, Any] = {}
    if cfg.scheme in ("classical", "classical-decay", "averaged-classical"):
        a = p["a"]
        grid = np.round(np.arange(-200, 201) * 0.01, 12)
        fit = cl.gradient_identity_residual(cl.demo_psi, a, grid, cl.demo_dpsi)
        obj = cl.AveragedObjective1D(cl.demo_psi, a, cl.demo_dpsi)
        gap = np.max(np.abs(obj.G_bar(grid) - 0.5 * a * a * np.asarray(obj.dpsi_bar(grid))))
        closed = np.max(np.abs(cl.demo_psi_bar_closed_form(a, grid) - obj.psi_bar(grid)))
        star = cl.demo_psi_bar_argmax(a)
        a3 = cl.check_assumption3(obj, star, np.linspace(-3, 3, 601))
        out.update(
            gradient_identity={"C_fit": fit.C_fit, "max_residual_half": float(gap)},
            closed_form_max_gap=float(closed),
            assumption3=a3.summary(),
        )
    elif cfg.scheme in ("source", "source-transformed", "averaged-source"):
        params, b, s0 = _source_setup(cfg)
        pm, bm = _moving_frame(params, b)
        obj = src.AveragedObjective2D.for_disk(src.demo_signal, p["a"])
        xs = np.arange(-10, 10.001, 2.0)
        Q = np.array([(x, y) for x in xs for y in xs])
        out["divergence_identity_residual"] = src.divergence_identity_residual(obj, Q, params.c)
        rt = src.from_transformed(src.to_transformed(s0, pm, bm, 0.3), pm, bm, 0.3)
        out["round_trip_error"] = float(np.max(np.abs(rt - s0)))
        axis = np.arange(-12, 12.001, 0.5)
        a4 = src.check_assumption4(obj, (0.0, 0.0), (axis, axis), 6.0)
        out["assumption4"] = a4.summary()
    else:
        sys, _ = lyapunov_system_for(cfg)
        out["b_block_eigenvalues"] = st.b_block_eigenvalues(sys.k)
    return out


_RUNNERS = {
    "classical": lambda c: _run_classical(c, False),
    "classical-decay": lambda c: _run_classical(c, True),
    "averaged-classical": _run_averaged_classical,
    "source": _run_source,
    "source-transformed": _run_source,
    "averaged-source": _run_averaged_source,
    "lyapunov": _run_lyapunov,
}


def simulate(cfg: ScenarioConfig) -> ScenarioResult:
    start = time.perf_counter()
    result = _RUNNERS[cfg.scheme](cfg)
    if "identity-report" in cfg.outputs:
        result.identity = identity_report(cfg)
    result.summary["wall_time_s"] = time.perf_counter() - start
    result.summary["config"] = cfg.to_dict()
    return result


def write_result(result: ScenarioResult, out_dir: str | Path) -> dict[str, str]:
    out = Path(out_dir) / result.config.name
    paths = {}
    if "trajectory-csv" in result.config.outputs:
        paths["trajectory"] = str(write_csv(out / "trajectory.csv", result.columns, result.table))
    for key, (cols, data) in result.extra_tables.items():
        paths[key] = str(write_csv(out / f"{key}.csv", cols, data))
    if "summary-json" in result.config.outputs:
        paths["summary"] = str(write_json(out / "summary.json", result.summary))
    if result.identity is not None:
        paths["identity_report"] = str(write_json(out / "identity-report.json", result.identity))
    return paths


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path) -> dict[str, str]:
    """Simulate ``cfg`` and write its artifacts under ``out_dir/<name>/``."""
    return write_result(simulate(cfg), out_dir)


# built-in reproductions

def _builtin(name, scheme, parameters, horizon, integrator=None):
    raw = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "scheme": scheme,
        "parameters": parameters,
        "horizon": horizon,
        "integrator": integrator or {"rtol": 1e-6, "atol": 1e-6},
        "outputs": ["trajectory-csv", "summary-json"],
    }
    return parse_config(raw)


BUILTINS = {
    "fig2a": lambda: _builtin("fig2a", "classical", {"a": 0.4, "eps": 0.01}, 150.0),
    "fig2b": lambda: _builtin("fig2b", "classical", {"a": 0.7, "eps": 0.01}, 150.0),
    "fig3": lambda: _builtin("fig3", "classical-decay", {"a": 1.0, "eps": 0.01}, 150.0),
    "fig4-center": lambda: _builtin("fig4-center", "source-transformed", {"a": 0.5, "eps": 0.1}, 60.0),
    "fig4-right": lambda: _builtin("fig4-right", "source-transformed", {"a": 1.0, "eps": 0.1}, 60.0),
}
FIGURES = tuple(BUILTINS)


def builtin_config(fig_id: str) -> ScenarioConfig:
    try:
        return BUILTINS[fig_id]()
    except KeyError:
        raise ConfigError(f"unknown figure id {fig_id!r}; choose from {list(FIGURES)}") from None


def objective_table(cfg: ScenarioConfig, result: ScenarioResult | None = None) -> tuple[list[str], np.ndarray]:
    """Averaged objective sampled for plotting: a curve in 1-D, a surface in 2-D."""
    a = cfg.parameters["a"]
    if cfg.scheme.startswith("source") or cfg.scheme == "averaged-source":
        axis = np.round(np.arange(-48, 49) * 0.25, 12)
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        Q = np.column_stack([X.ravel(), Y.ravel()])
        from ..averaging import disk_rule

        bar = region_average(src.demo_signal, Q, disk_rule(a), chunk=256)
        return ["q1", "q2", "psi", "psi_bar"], np.column_stack([Q, src.demo_signal(Q), bar])
    theta = np.round(np.arange(-200, 201) * 0.01, 12)
    psi = cl.demo_psi(theta)
    quad = _psi_bar_rows(theta, a)
    closed = cl.demo_psi_bar_closed_form(a, theta)
    cols = ["theta", "psi", "psi_bar", "psi_bar_closed_form"]
    data = [theta, psi, quad, closed]
    if cfg.scheme == "classical-decay" and result is not None:
        a_final = result.summary["terminal_amplitude"]
        cols.append("psi_bar_terminal_amplitude")
        data.append(_psi_bar_rows(theta, np.full_like(theta, a_final)))
    return cols, np.column_stack(data)


def reproduce_figure(
    fig_id: str, out_dir: str | Path, tol: float | None = None
) -> tuple[ScenarioResult, dict[str, str]]:
    cfg = builtin_config(fig_id)
    if tol is not None:
        cfg = cfg.with_overrides(integrator={"rtol": tol, "atol": tol})
    result = simulate(cfg)
    result.extra_tables["objective"] = objective_table(cfg, result)
    return result, write_result(result, out_dir)


# sweeps

def _apply_grid_point(base: ScenarioConfig, point: dict[str, Any], index: int) -> ScenarioConfig:
    d = base.to_dict()
    for key, value in point.items():
        name = key.split(".", 1)[1] if key.startswith("parameters.") else key
        if key in ("horizon", "seed", "samples"):
            d[key] = value
        elif name in d["parameters"]:
            d["parameters"][name] = value
        else:
            raise ConfigError(f"sweep key {key!r} is neither a parameter nor horizon/seed/samples")
    d["name"] = f"{base.name}-{index:03d}"
    return parse_config(d)


def expand_grid(base: ScenarioConfig, grid: dict[str, list]) -> list[tuple[dict[str, Any], ScenarioConfig]]:
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("sweep grid must be a non-empty object of key -> list")
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise ConfigError(f"sweep values for {k!r} must be a non-empty list")
    points = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        point = dict(zip(keys, combo))
        points.append((point, _apply_grid_point(base, point, i)))
    return points


def _sweep_worker(cfg_dict: dict[str, Any], out_dir: str) -> dict[str, Any]:
    cfg = parse_config(cfg_dict)
    try:
        result = simulate(cfg)
        write_result(result, out_dir)
        return {"status": "ok", "summary": result.summary}
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        return {"status": f"failed: {type(exc).__name__}: {exc}", "summary": {}}


SWEEP_METRICS = (
    "terminal_theta_hat",
    "period_mean_theta_hat",
    "terminal_distance",
    "terminal_abs_q",
    "period_mean_abs_q",
    "averaged_gap",
    "n_steps",
)


def sweep(base: ScenarioConfig, grid: dict[str, list], out_dir: str | Path, jobs: int = 1) -> list[dict[str, Any]]:
    """Run every grid point; one row per point in grid order, failures recorded per row."""
    points = expand_grid(base, grid)
    payloads = [(cfg.to_dict(), str(out_dir)) for _, cfg in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_worker, *zip(*payloads)))
    else:
        outcomes = [_sweep_worker(*p) for p in payloads]
    rows = []
    for (point, cfg), outcome in zip(points, outcomes):
        row = {"name": cfg.name, **point, "status": outcome["status"]}
        for key in SWEEP_METRICS:
            if key in outcome["summary"]:
                row[key] = outcome["summary"][key]
        rows.append(row)
    keys = list(grid)
    metric_cols = [m for m in SWEEP_METRICS if any(m in r for r in rows)]
    columns = ["name", *keys, *metric_cols, "status"]
    table = [[r.get(c) if c in r else None for c in columns] for r in rows]
    write_csv(Path(out_dir) / f"{base.name}-sweep.csv", columns, table)
    write_json(Path(out_dir) / f"{base.name}-sweep.json", {"grid": grid, "rows": rows})
    return rows
