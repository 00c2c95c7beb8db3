"""Deterministic ODE integration: fixed-step RK4 and adaptive Dormand-Prince 5(4).

All right-hand sides use the ``rhs(x, t)`` calling convention and return an
array of the same shape as ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

RHS = Callable[[NDArray[np.float64], float], NDArray[np.float64]]


class IntegrationError(RuntimeError):
    """Raised when an integration cannot be completed.

    ``cause`` is one of ``"max_steps"``, ``"non_finite"`` or ``"step_underflow"``.
    """

    def __init__(self, message: str, cause: str, t: float | None = None):
        super().__init__(message)
        self.cause = cause
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    mode: Literal["fixed", "adaptive"] = "adaptive"
    dt: float = 1e-2
    rtol: float = 1e-6
    atol: float = 1e-6
    max_steps: int = 10**8

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown integrator mode {self.mode!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.max_steps > 0:
            raise ValueError("max_steps must be positive")

    @classmethod
    def tight(cls) -> "IntegratorConfig":
        """Tolerances used by the identity checks."""
        return cls(rtol=1e-9, atol=1e-9)


@dataclass(frozen=True)
class Trajectory:
    """Time grid plus aligned state samples.

    ``derivatives`` holds the right-hand side at each sample when the
    trajectory came out of :func:`integrate`; :func:`resample` then uses cubic
    Hermite interpolation instead of a spline.
    """

    times: NDArray[np.float64]
    states: NDArray[np.float64]
    metadata: dict[str, Any] = field(default_factory=dict)
    derivatives: NDArray[np.float64] | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if times.ndim != 1 or len(times) < 1:
            raise ValueError("times must be a non-empty 1-D sequence")
        if states.shape[0] != len(times):
            raise ValueError("times and states must have equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("states contain non-finite entries")
        times.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if self.derivatives is not None:
            d = np.array(self.derivatives, dtype=float).reshape(states.shape)
            d.flags.writeable = False
            object.__setattr__(self, "derivatives", d)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> NDArray[np.float64]:
        return self.states[-1]

    def component(self, i: int) -> NDArray[np.float64]:
        return self.states[:, i]


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _checked(rhs: RHS, x, t) -> NDArray[np.float64]:
    dx = np.asarray(rhs(x, t), dtype=float)
    if not np.all(np.isfinite(dx)):
        raise IntegrationError(f"non-finite right-hand side at t={t!r}", "non_finite", t)
    return dx


def _initial_step(rhs, x0, f0, t0, span, rtol, atol) -> float:
    # Hairer-Norsett-Wanner starting step heuristic
    scale = atol + rtol * np.abs(x0)
    d0 = np.max(np.abs(x0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = _checked(rhs, x0 + h0 * f0, t0 + h0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _integrate_adaptive(rhs, x0, t0, t1, cfg: IntegratorConfig):
    rtol, atol = cfg.rtol, cfg.atol
    x = x0.copy()
    t = t0
    f = _checked(rhs, x, t)
    times, states, derivs = [t], [x.copy()], [f.copy()]
    h = _initial_step(rhs, x, f, t0, t1 - t0, rtol, atol)
    # PI controller constants (Hairer's DOPRI5 defaults)
    beta = 0.04
    expo = 0.2 - 0.75 * beta
    safe, fac_min, fac_max = 0.9, 0.2, 10.0
    err_old = 1e-4
    rejected = False
    steps = 0
    while t < t1:
        steps += 1
        if steps > cfg.max_steps:
            raise IntegrationError(
                f"step budget of {cfg.max_steps} exhausted at t={t!r}", "max_steps", t
            )
        last = t + h >= t1 or (t1 - (t + h)) < 1e-12 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        k = [f]
        for i in range(1, 6):
            xi = x.copy()
            for j, aij in enumerate(_A[i]):
                if aij:
                    xi += h * aij * k[j]
            k.append(_checked(rhs, xi, t + _C[i] * h))
        x_new = x.copy()
        for bi, ki in zip(_B, k):
            if bi:
                x_new += h * bi * ki
        t_new = t1 if last else t + h
        f_new = _checked(rhs, x_new, t_new)
        k.append(f_new)
        err_vec = np.zeros_like(x)
        for ei, ki in zip(_E, k):
            if ei:
                err_vec += ei * ki
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.max(np.abs(h * err_vec) / scale))
        if not math.isfinite(err):
            raise IntegrationError(f"non-finite error estimate at t={t!r}", "non_finite", t)
        fac11 = err**expo if err > 0 else 0.0
        if err <= 1.0:
            fac = fac11 / err_old**beta
            fac = min(1 / fac_min, max(1 / fac_max, fac / safe))
            h_next = h / fac
            if rejected:
                h_next = min(h_next, h)
            err_old = max(err, 1e-4)
            rejected = False
            t, x, f = t_new, x_new, f_new
            times.append(t)
            states.append(x.copy())
            derivs.append(f.copy())
            h = h_next
        else:
            h = h / min(1 / fac_min, fac11 / safe)
            rejected = True
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t!r}", "step_underflow", t)
    return times, states, derivs


def _rk4_step(rhs, x, t, h, k1):
    k2 = _checked(rhs, x + 0.5 * h * k1, t + 0.5 * h)
    k3 = _checked(rhs, x + 0.5 * h * k2, t + 0.5 * h)
    k4 = _checked(rhs, x + h * k3, t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_fixed(rhs, x0, t0, t1, cfg: IntegratorConfig):
    n = max(1, math.ceil((t1 - t0) / cfg.dt - 1e-9))
    if n > cfg.max_steps:
        raise IntegrationError(
            f"fixed step dt={cfg.dt} needs {n} steps, budget is {cfg.max_steps}",
            "max_steps",
            t0,
        )
    h = (t1 - t0) / n
    x = x0.copy()
    f = _checked(rhs, x, t0)
    times, states, derivs = [t0], [x.copy()], [f.copy()]
    for i in range(n):
        t = t0 + i * h
        x = _rk4_step(rhs, x, t, h, f)
        t_new = t1 if i == n - 1 else t0 + (i + 1) * h
        f = _checked(rhs, x, t_new)
        times.append(t_new)
        states.append(x.copy())
        derivs.append(f.copy())
    return times, states, derivs


def integrate(
    rhs: RHS,
    x0: ArrayLike,
    t0: float,
    t1: float,
    cfg: IntegratorConfig | None = None,
    metadata: dict[str, Any] | None = None,
) -> Trajectory:
    """Integrate ``x' = rhs(x, t)`` from ``t0`` to ``t1``.

    Every accepted step is stored together with the right-hand side value at
    that step, so the returned trajectory supports Hermite dense output.

    Raises
    ------
    ValueError
        If ``t1 <= t0`` or ``x0`` is not finite.
    IntegrationError
        On step-budget exhaustion or a non-finite right-hand side.
    """
    cfg = cfg or IntegratorConfig()
    x0 = np.array(x0, dtype=float).ravel()
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    t0, t1 = float(t0), float(t1)
    if cfg.mode == "fixed":
        times, states, derivs = _integrate_fixed(rhs, x0, t0, t1, cfg)
    else:
        times, states, derivs = _integrate_adaptive(rhs, x0, t0, t1, cfg)
    meta = dict(metadata or {})
    meta.setdefault("integrator", cfg.mode)
    return Trajectory(np.array(times), np.array(states), meta, np.array(derivs))


def resample(traj: Trajectory, grid: ArrayLike) -> Trajectory:
    """Interpolate ``traj`` onto ``grid``.

    Uses cubic Hermite interpolation on stored derivatives when available,
    otherwise a not-a-knot cubic spline. Either way the original samples are
    reproduced exactly.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    t = traj.times
    if grid.size == 0:
        raise ValueError("empty resampling grid")
    if grid[0] < t[0] or grid[-1] > t[-1] or np.any(grid < t[0]) or np.any(grid > t[-1]):
        raise ValueError(f"grid leaves trajectory span [{t[0]}, {t[-1]}]")
    meta = dict(traj.metadata)
    if len(t) == 1:
        return Trajectory(grid, np.repeat(traj.states, len(grid), axis=0), meta)
    if traj.derivatives is None:
        if len(t) < 4:
            states = np.column_stack(
                [np.interp(grid, t, traj.states[:, i]) for i in range(traj.dimension)]
            )
        else:
            states = CubicSpline(t, traj.states, axis=0)(grid)
        return Trajectory(grid, states, meta)
    idx = np.clip(np.searchsorted(t, grid, side="right") - 1, 0, len(t) - 2)
    t0, t1 = t[idx], t[idx + 1]
    h = t1 - t0
    s = ((grid - t0) / h)[:, None]
    y0, y1 = traj.states[idx], traj.states[idx + 1]
    d0, d1 = traj.derivatives[idx], traj.derivatives[idx + 1]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    states = h00 * y0 + h10 * h[:, None] * d0 + h01 * y1 + h11 * h[:, None] * d1
    derivs = (
        (6 * s**2 - 6 * s) * y0 / h[:, None]
        + (3 * s**2 - 4 * s + 1) * d0
        + (-6 * s**2 + 6 * s) * y1 / h[:, None]
        + (3 * s**2 - 2 * s) * d1
    )
    return Trajectory(grid, states, meta, derivs)


def uniform_grid(t0: float, t1: float, n: int) -> NDArray[np.float64]:
    grid = np.linspace(t0, t1, n)
    grid[-1] = t1
    return grid
