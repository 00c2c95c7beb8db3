"""Damped gradient systems, their Lyapunov functions and an empirical
practical-stability probe for dither-driven loops.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .ode import IntegrationError, IntegratorConfig, Trajectory, integrate, resample

Vec = NDArray[np.float64]


@dataclass(frozen=True)
class LyapunovSystem:
    """``x' = v``, ``v' = -k v - grad V(x)`` with minimizer ``x_star``.

    ``V`` and ``gradV`` accept a single point of shape ``(n,)`` or a batch of
    shape ``(m, n)``.
    """

    n: int
    k: float
    V: Callable[[ArrayLike], ArrayLike]
    gradV: Callable[[ArrayLike], ArrayLike]
    x_star: Vec
    C_radius: float = 0.0
    name: str = "gradient-system"

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("damping must be positive")
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=float).reshape(self.n))

    def check_conditions(self, samples: ArrayLike, tol: float = 1e-12) -> bool:
        """``V(x*) = 0`` and ``V > 0``, ``grad V != 0`` at the sampled points away from ``x*``."""
        if abs(float(self.V(self.x_star))) > tol:
            return False
        X = np.asarray(samples, dtype=float).reshape(-1, self.n)
        X = X[np.linalg.norm(X - self.x_star, axis=1) > 1e-9]
        V = np.asarray(self.V(X), dtype=float)
        G = np.asarray(self.gradV(X), dtype=float).reshape(len(X), self.n)
        return bool(np.all(V > 0) and np.all(np.linalg.norm(G, axis=1) > 0))


def damped_gradient_rhs(sys: LyapunovSystem, state: ArrayLike) -> Vec:
    s = np.asarray(state, dtype=float)
    x, v = s[: sys.n], s[sys.n :]
    g = np.asarray(sys.gradV(x), dtype=float).reshape(sys.n)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite potential gradient")
    return np.concatenate([v, -sys.k * v - g])


def energy(sys: LyapunovSystem, x: ArrayLike, v: ArrayLike, V: ArrayLike | None = None):
    """Kinetic plus potential energy; vectorized over a leading batch axis.

    Pass precomputed potential values as ``V`` to skip re-evaluating them.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    pot = np.asarray(sys.V(x) if V is None else V, dtype=float)
    return 0.5 * np.sum(v * v, axis=-1) + pot


def b_function(sys: LyapunovSystem, x: ArrayLike, v: ArrayLike, V: ArrayLike | None = None):
    """Radially unbounded certificate whose decrease holds outside the set C."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    pot = np.asarray(sys.V(x) if V is None else V, dtype=float)
    k = sys.k
    e = x - sys.x_star
    quad = k * k * np.sum(e * e, axis=-1) + 2 * k * np.sum(e * v, axis=-1) + (1 + k * k) * np.sum(v * v, axis=-1)
    return (1 + k * k) * (pot - float(sys.V(sys.x_star))) + 0.5 * quad


def energy_rate(sys: LyapunovSystem, x: ArrayLike, v: ArrayLike):
    v = np.asarray(v, dtype=float)
    return -sys.k * np.sum(v * v, axis=-1)


def b_rate(sys: LyapunovSystem, x: ArrayLike, v: ArrayLike):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    g = np.asarray(sys.gradV(x), dtype=float).reshape(x.shape)
    k = sys.k
    return -(k**3) * np.sum(v * v, axis=-1) - k * np.sum(g * (x - sys.x_star), axis=-1)


def b_block_eigenvalues(k: float) -> Vec:
    """Eigenvalues of the 2x2 block pattern ``[[k^2, k], [k, 1 + k^2]]``."""
    return np.linalg.eigvalsh(np.array([[k * k, k], [k, 1 + k * k]]))


@dataclass
class DissipationReport:
    max_energy_mismatch: float
    max_b_mismatch: float
    max_energy_rate: float
    max_b_rate_outside: float
    b_excess_outside: float
    tol: float

    @property
    def energy_ok(self) -> bool:
        return self.max_energy_mismatch <= self.tol and self.max_energy_rate <= self.tol

    @property
    def b_ok(self) -> bool:
        return self.max_b_mismatch <= self.tol and self.max_b_rate_outside <= self.tol

    @property
    def bounded(self) -> bool:
        return self.b_excess_outside <= self.tol

    @property
    def passed(self) -> bool:
        return self.energy_ok and self.b_ok and self.bounded

    def summary(self) -> dict:
        return {
            "max_energy_mismatch": self.max_energy_mismatch,
            "max_b_mismatch": self.max_b_mismatch,
            "max_energy_rate": self.max_energy_rate,
            "max_b_rate_outside": self.max_b_rate_outside,
            "b_excess_outside": self.b_excess_outside,
            "passed": self.passed,
        }


def _uniform(times, rtol=1e-9):
    d = np.diff(times)
    return len(d) > 0 and np.ptp(d) <= rtol * max(d.mean(), 1e-300)


def check_dissipation(
    sys: LyapunovSystem, traj: Trajectory, h: float | None = None, tol: float = 1e-6
) -> DissipationReport:
    """Compare differenced ``E`` and ``B`` along ``traj`` with their closed-form rates.

    The first ``2n`` state components are read as ``[x, v]``. A trajectory on
    a uniform grid is used as is; otherwise it is resampled at spacing ``h``.
    Derivatives use the fourth-order five-point central stencil.
    """
    times = traj.times
    if h is not None or not _uniform(times):
        if h is None:
            raise ValueError("non-uniform trajectory: pass the resampling spacing h")
        n_pts = int(math.floor((times[-1] - times[0]) / h)) + 1
        grid = times[0] + h * np.arange(n_pts)
        traj = resample(traj, grid)
        times = traj.times
    if len(times) < 5:
        raise ValueError("trajectory too coarse for finite differences (need >= 5 samples)")
    dt = float(np.mean(np.diff(times)))
    n = sys.n
    X = traj.states[:, :n]
    Vv = traj.states[:, n : 2 * n]
    pot = np.asarray(sys.V(X), dtype=float)
    E = energy(sys, X, Vv, pot)
    B = b_function(sys, X, Vv, pot)

    def d5(y):
        return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * dt)

    inner = slice(2, -2)
    Ed, Bd = d5(E), d5(B)
    Ef = energy_rate(sys, X[inner], Vv[inner])
    Bf = b_rate(sys, X[inner], Vv[inner])
    outside = np.linalg.norm(X[inner] - sys.x_star, axis=1) > sys.C_radius
    all_out = np.linalg.norm(X - sys.x_star, axis=1) > sys.C_radius
    return DissipationReport(
        max_energy_mismatch=float(np.max(np.abs(Ed - Ef))),
        max_b_mismatch=float(np.max(np.abs(Bd - Bf))),
        max_energy_rate=float(np.max(Ed)),
        max_b_rate_outside=float(np.max(Bd[outside])) if outside.any() else -math.inf,
        b_excess_outside=float(np.max(B[all_out] - B[0])) if all_out.any() else -math.inf,
        tol=tol,
    )


def quadratic_system(n: int = 1, k: float = 1.0, x_star: ArrayLike | None = None) -> LyapunovSystem:
    xs = np.zeros(n) if x_star is None else np.asarray(x_star, dtype=float)

    def V(x):
        e = np.asarray(x, dtype=float) - xs
        return 0.5 * np.sum(e * e, axis=-1)

    def gradV(x):
        return np.asarray(x, dtype=float) - xs

    return LyapunovSystem(n, k, V, gradV, xs, 0.0, "quadratic")


def classical_averaged_system(obj, gains, theta_star: float, C_radius: float = 0.0) -> LyapunovSystem:
    """Heavy-ball form of the averaged parameter dynamics.

    ``grad V = -K*omega_L*G_bar`` comes straight from the dither-period
    quadrature; ``V`` is the matching potential ``K*omega_L*(a^2/2)*(psi_bar(theta*) - psi_bar)``.
    """
    scale = gains.K * gains.omega_L
    top = obj.psi_bar(theta_star)

    def V(x):
        th = np.asarray(x, dtype=float)[..., 0]
        return scale * 0.5 * obj.a**2 * (top - np.asarray(obj.psi_bar(th)))

    def gradV(x):
        x = np.asarray(x, dtype=float)
        return (-scale * np.asarray(obj.G_bar(x[..., 0])))[..., None]

    return LyapunovSystem(1, gains.omega_L, V, gradV, [theta_star], C_radius, "classical-averaged")


def source_averaged_system(obj, params, q_star: ArrayLike = (0.0, 0.0), C_radius: float = 6.0) -> LyapunovSystem:
    """Heavy-ball form of the averaged position dynamics, ``k = kappa/m``."""
    q_star = np.asarray(q_star, dtype=float)
    top = obj.psi_bar(q_star)
    coef = params.c / params.m

    def V(x):
        return coef * (top - np.asarray(obj.psi_bar(np.asarray(x, dtype=float))))

    def gradV(x):
        return -coef * obj.grad_psi_bar(np.asarray(x, dtype=float))

    return LyapunovSystem(2, params.kappa / params.m, V, gradV, q_star, C_radius, "source-averaged")


# empirical practical-stability probe

@dataclass(frozen=True)
class KLEnvelope:
    """``beta(r, t) = C * r * exp(-lambda * t)``."""

    C: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (self.C >= 1 and self.lam > 0):
            raise ValueError("need C >= 1 and lambda > 0")

    def __call__(self, r, t):
        return self.C * np.asarray(r, dtype=float) * np.exp(-self.lam * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class ProbeSystem:
    """One member of an ``eps``-indexed family, as seen by :func:`sgpuas_probe`.

    ``embed(position, velocity)`` builds a full initial state from offsets in
    the observed coordinates; ``project(states)`` maps an ``(m, d)`` state array
    to the ``(m, p)`` coordinates compared against the target; ``period`` is the
    dither period in integration time.
    """

    rhs: Callable[[Vec, float], Vec]
    embed: Callable[[Vec, Vec], Vec]
    project: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    period: float
    horizon: float
    position_dim: int
    cfg: IntegratorConfig = field(default_factory=IntegratorConfig)
    velocity_dim: int | None = None


@dataclass
class ProbeRow:
    eps: float
    passed: bool
    n_runs: int
    failures: list = field(default_factory=list)
    max_terminal_distance: float = float("nan")

    def as_dict(self):
        return {
            "eps": self.eps,
            "passed": self.passed,
            "n_runs": self.n_runs,
            "n_failures": len(self.failures),
            "failures": self.failures[:16],
            "max_terminal_distance": self.max_terminal_distance,
        }


@dataclass
class SgpuasReport:
    r: float
    delta: float
    eps_passed: float | None
    rows: list[ProbeRow]
    envelope: KLEnvelope | None
    warnings: list[str] = field(default_factory=list)

    def as_dict(self):
        return {
            "r": self.r,
            "delta": self.delta,
            "eps_passed": self.eps_passed,
            "rows": [row.as_dict() for row in self.rows],
            "envelope": None if self.envelope is None else {"C": self.envelope.C, "lambda": self.envelope.lam},
            "warnings": self.warnings,
        }


def probe_initial_offsets(
    position_dim: int, r: float, seed: int, n: int = 16, velocity_dim: int | None = None
) -> list[tuple[Vec, Vec]]:
    """Deterministic offsets ``(position, velocity)`` with joint norm at most ``r``.

    The first half rest on the position sphere of radius ``r``. In one
    dimension that sphere has two points, so only the first two use the full
    radius and the rest take seeded radii in ``(0, r)`` with alternating sign.
    The second half spread the radius ``r`` over position and velocity along
    seeded directions. ``velocity_dim`` sizes the non-position block and
    defaults to ``position_dim``.
    """
    vdim = position_dim if velocity_dim is None else velocity_dim
    rng = np.random.default_rng(seed)
    half = n // 2
    out = []
    if position_dim == 1:
        radii = np.concatenate([[r, r], rng.uniform(0.2 * r, r, half - 2)])
        for i, rad in enumerate(radii):
            sign = 1.0 if i % 2 == 0 else -1.0
            out.append((np.array([sign * rad]), np.zeros(vdim)))
    else:
        phase = rng.uniform(0, 2 * np.pi)
        for i in range(half):
            ang = phase + 2 * np.pi * i / half
            direction = np.zeros(position_dim)
            direction[0], direction[1] = np.cos(ang), np.sin(ang)
            out.append((r * direction, np.zeros(vdim)))
    for _ in range(n - half):
        d = rng.normal(size=position_dim + vdim)
        d *= r / np.linalg.norm(d)
        out.append((d[:position_dim], d[position_dim:]))
    return out


def _run_one(system: ProbeSystem, x_target: Vec, pos, vel, t0, delta, hysteresis):
    s0 = system.embed(pos, vel)
    try:
        traj = integrate(system.rhs, s0, t0, t0 + system.horizon, system.cfg)
    except (IntegrationError, FloatingPointError) as exc:
        return {"ok": False, "reason": f"integration failure: {exc}"}
    d = np.linalg.norm(system.project(traj.states) - x_target, axis=1)
    t = traj.times - t0
    result = {"t": t, "d": d, "d0": float(d[0]), "terminal": float(d[-1])}
    # capture: the last crossing into the ball after the final excursion beyond the hysteresis band
    outside = np.flatnonzero(d > (1 + hysteresis) * delta)
    start = outside[-1] + 1 if outside.size else 0
    inside = np.flatnonzero(d[start:] <= delta)
    if inside.size == 0:
        return {**result, "ok": False, "reason": "never settled in the delta-ball"}
    entry = start + int(inside[0])
    if t[-1] - t[entry] < system.period:
        return {**result, "ok": False, "reason": "captured less than one dither period before the horizon", "entry": entry}
    return {**result, "ok": True, "entry": entry}


def _fit_envelope(results, delta) -> KLEnvelope | None:
    ts, ys = [], []
    for res in results:
        if "d" not in res or res["d0"] <= 0:
            continue
        d, t = res["d"], res["t"]
        end = res.get("entry", len(d))
        mask = (np.arange(len(d)) < end) & (d > delta)
        if mask.sum() < 2:
            continue
        ts.append(t[mask])
        ys.append(np.log(d[mask] / res["d0"]))
    if not ts:
        return None
    t = np.concatenate(ts)
    y = np.concatenate(ys)
    if np.ptp(t) == 0:
        return None
    slope, intercept = np.polyfit(t, y, 1)
    lam = max(-slope, 1e-12)
    # C must dominate every pre-entry sample, not just the fit
    C = max(1.0, math.exp(float(np.max(y + lam * t))), math.exp(intercept))
    return KLEnvelope(C, lam)


def sgpuas_probe(
    family: Callable[[float], ProbeSystem],
    x_star: ArrayLike,
    r: float,
    delta: float,
    eps_list: list[float],
    seed: int = 0,
    n_samples: int = 16,
    hysteresis: float = 0.1,
    jobs: int = 1,
) -> SgpuasReport:
    """Empirical containment test for one ``(r, delta)`` pair over several ``eps``.

    For each ``eps`` every seeded initial offset is started at the four phases
    ``t0 = j * period / 4``. A run is captured at its first entry into the
    ``delta``-ball after its last excursion beyond ``(1 + hysteresis) * delta``;
    passing through the ball during the transient is not capture. The ``eps``
    passes when every run is captured at least one dither period before the
    horizon. The fitted envelope is a diagnostic, not a pass criterion.
    """
    x_target = np.atleast_1d(np.asarray(x_star, dtype=float))
    if list(eps_list) != sorted(eps_list, reverse=True):
        raise ValueError("eps_list must be decreasing")
    rows: list[ProbeRow] = []
    all_results = []
    for eps in eps_list:
        system = family(eps)
        offsets = probe_initial_offsets(system.position_dim, r, seed, n_samples, system.velocity_dim)
        jobs_list = [
            (i, j, pos, vel, j * system.period / 4) for i, (pos, vel) in enumerate(offsets) for j in range(4)
        ]

        def work(item, system=system):
            i, j, pos, vel, t0 = item
            return _run_one(system, x_target, pos, vel, t0, delta, hysteresis)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(work, jobs_list))
        else:
            results = [work(item) for item in jobs_list]
        failures = [
            {"sample": i, "t0": t0, "reason": res["reason"]}
            for (i, j, _, _, t0), res in zip(jobs_list, results)
            if not res["ok"]
        ]
        terminal = [res["terminal"] for res in results if "terminal" in res]
        rows.append(
            ProbeRow(eps, not failures, len(results), failures, float(max(terminal)) if terminal else float("nan"))
        )
        all_results.extend(res for res in results if res["ok"])
    passed = [row.eps for row in rows if row.passed]
    warnings = []
    seen_pass = False
    for row in rows:
        if row.passed:
            seen_pass = True
        elif seen_pass:
            warnings.append(f"eps={row.eps} failed although a larger eps passed")
    return SgpuasReport(r, delta, max(passed) if passed else None, rows, _fit_envelope(all_results, delta), warnings)
