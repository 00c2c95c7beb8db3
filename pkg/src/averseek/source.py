"""Source seeking with a planar damped point mass.

The control force drives the mass along the dither curve ``u(t/eps)`` and adds
a flux-like term proportional to the high-passed measurement. In the moving
frame ``q_tilde = q - u + eps*(kappa/m)*U`` the loop averages to a heavy-ball
system climbing the region average of the signal.

Physical states are ``[q1, q2, q1', q2', eta]``; transformed and averaged
states use the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .averaging import (
    DEFAULT_DISK_NODES,
    DEFAULT_PERIODIC_NODES,
    QuadratureRule,
    boundary_flux,
    boundary_mean,
    disk_rule,
    fd_gradient,
    region_average,
)
from .boundary import DitherBoundary, circle_boundary
from .ode import IntegratorConfig, Trajectory, integrate, resample

Signal = Callable[[ArrayLike], NDArray[np.float64]]


@dataclass(frozen=True)
class SourceParams:
    m: float = 1.0
    kappa: float = 1.0
    c: float = 1.0
    omega_H: float = 1.0
    eps: float = 0.1
    mu: float | None = None

    def __post_init__(self):
        if self.mu is None:
            object.__setattr__(self, "mu", self.m)
        for name in ("m", "kappa", "c", "omega_H", "eps", "mu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mass_known(self) -> bool:
        return self.mu == self.m


def demo_signal(q: ArrayLike) -> NDArray[np.float64]:
    """Gaussian-enveloped cosine ripple; global maximum 8 at the origin."""
    q = np.asarray(q, dtype=float)
    x, y = q[..., 0], q[..., 1]
    return (6 + np.cos(3 * x) + np.cos(3 * y)) * np.exp(-(x * x + y * y) / 25.0)


def control_force(
    p: SourceParams, b: DitherBoundary, y: float, eta: float, t: float
) -> NDArray[np.float64]:
    """Inertial dither term plus the demodulated flux term.

    The inertial term uses the assumed mass ``p.mu``, which equals ``p.m``
    unless the unknown-mass variant is requested.
    """
    tau = t / p.eps
    inertial = p.mu / p.eps**2 * b.u_ddot(tau)
    gain = p.c * b.T / b.area * (y - eta) * b.speed(tau)
    return inertial + gain * b.normal_at(tau)


def disk_force(a: float, m: float, c: float, eps: float, y: float, eta: float, t: float):
    """Closed form of :func:`control_force` for the circle of radius ``a``."""
    return a * (-m / eps**2 + 2 * c / a**2 * (y - eta)) * np.array([np.cos(t / eps), np.sin(t / eps)])


def rescale_for_unknown_mass(b: DitherBoundary, p: SourceParams) -> tuple[DitherBoundary, SourceParams]:
    """Rewrite an assumed-mass loop as a known-mass loop.

    The curve and region scale by ``mu/m`` and so does the gain, so the force
    built from the returned pair with the true mass equals the original force.
    """
    s = p.mu / p.m
    return b.scaled(s), replace(p, c=s * p.c, mu=p.m)


def closed_loop_rhs(
    psi: Signal, p: SourceParams, b: DitherBoundary, s: ArrayLike, t: float
) -> NDArray[np.float64]:
    s = np.asarray(s, dtype=float)
    q, qd, eta = s[:2], s[2:4], s[4]
    y = float(psi(q))
    if not np.isfinite(y):
        raise FloatingPointError("non-finite signal value")
    out = np.empty(5)
    out[:2] = qd
    out[2:4] = (-p.kappa * qd + control_force(p, b, y, eta, t)) / p.m
    out[4] = p.omega_H * (y - eta)
    return out


def _require_known_mass(p):
    if not p.mass_known:
        raise ValueError("moving-frame coordinates need mu == m; call rescale_for_unknown_mass first")


def frame_offset(p: SourceParams, b: DitherBoundary, t: ArrayLike):
    """Position and velocity offsets between physical and moving frames at ``t``."""
    tau = np.asarray(t, dtype=float) / p.eps
    r = p.kappa / p.m
    dq = b.u(tau) - p.eps * r * b.U(tau)
    dv = b.u_dot(tau) / p.eps - r * b.u(tau)
    return dq, dv


def to_transformed(s: ArrayLike, p: SourceParams, b: DitherBoundary, t: float) -> NDArray[np.float64]:
    _require_known_mass(p)
    s = np.asarray(s, dtype=float)
    dq, dv = frame_offset(p, b, t)
    return np.concatenate([s[:2] - dq, s[2:4] - dv, s[4:]])


def from_transformed(s: ArrayLike, p: SourceParams, b: DitherBoundary, t: float) -> NDArray[np.float64]:
    _require_known_mass(p)
    s = np.asarray(s, dtype=float)
    dq, dv = frame_offset(p, b, t)
    return np.concatenate([s[:2] + dq, s[2:4] + dv, s[4:]])


def transformed_rhs(
    psi: Signal, p: SourceParams, b: DitherBoundary, s: ArrayLike, t: float
) -> NDArray[np.float64]:
    """Loop dynamics in the moving frame, including the ``(kappa**2/m) u`` term."""
    s = np.asarray(s, dtype=float)
    q, qd, eta = s[:2], s[2:4], s[4]
    tau = t / p.eps
    u = b.u(tau)
    y = float(psi(q + u - p.eps * p.kappa / p.m * b.U(tau)))
    if not np.isfinite(y):
        raise FloatingPointError("non-finite signal value")
    flux = p.c * b.T / b.area * (y - eta) * b.speed(tau) * b.normal_at(tau)
    out = np.empty(5)
    out[:2] = qd
    out[2:4] = (-p.kappa * qd + flux + p.kappa**2 / p.m * u) / p.m
    out[4] = p.omega_H * (y - eta)
    return out


@dataclass(frozen=True)
class AveragedObjective2D:
    """Region average of a planar signal, with the boundary-flux gradient.

    ``rule`` is only needed for :meth:`psi_bar`; the averaged dynamics use the
    flux quadrature alone.
    """

    psi: Signal
    boundary: DitherBoundary
    rule: QuadratureRule | None = None
    n_boundary: int = DEFAULT_PERIODIC_NODES
    _nodes: tuple | None = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def for_disk(cls, psi: Signal, a: float, n_r: int = DEFAULT_DISK_NODES[0], n_phi: int = DEFAULT_DISK_NODES[1], **kw):
        return cls(psi, circle_boundary(a), disk_rule(a, n_r, n_phi), **kw)

    def psi_bar(self, q: ArrayLike):
        if self.rule is None:
            raise ValueError("no interior quadrature rule attached")
        return region_average(self.psi, q, self.rule)

    def G_bar(self, q: ArrayLike, c: float = 1.0) -> NDArray[np.float64]:
        return boundary_flux(self.psi, q, self.boundary, c, self.n_boundary)

    def grad_psi_bar(self, q: ArrayLike) -> NDArray[np.float64]:
        return self.G_bar(q, 1.0)

    def z_bar(self, q: ArrayLike):
        return boundary_mean(self.psi, q, self.boundary, self.n_boundary)

    def flux_and_mean(self, q: ArrayLike, c: float = 1.0) -> tuple[NDArray[np.float64], float]:
        """``G_bar(q, c)`` and ``z_bar(q)`` for one point from a single pass of samples."""
        b = self.boundary
        if self._nodes is None:
            tau = b.nodes(self.n_boundary)
            kernel = b.speed(tau)[:, None] * b.normal_at(tau) * (b.T / self.n_boundary / b.area)
            object.__setattr__(self, "_nodes", (b.u(tau), kernel))
        pts, kernel = self._nodes
        vals = np.asarray(self.psi(np.asarray(q, dtype=float) + pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite signal sample")
        return c * (vals @ kernel), float(vals.mean())


def averaged_rhs(obj: AveragedObjective2D, p: SourceParams, state: ArrayLike) -> NDArray[np.float64]:
    s = np.asarray(state, dtype=float)
    q, qd, eta = s[:2], s[2:4], s[4]
    out = np.empty(5)
    out[:2] = qd
    G, z = obj.flux_and_mean(q, p.c)
    out[2:4] = (-p.kappa * qd + G) / p.m
    out[4] = p.omega_H * (z - eta)
    return out


def divergence_identity_residual(
    obj: AveragedObjective2D, q_grid: ArrayLike, c: float = 1.0, h: float = 1e-4
) -> float:
    """Worst gap between the flux integral and ``c`` times the differenced region average."""
    Q = np.atleast_2d(np.asarray(q_grid, dtype=float))
    flux = obj.G_bar(Q, c)
    fd = c * fd_gradient(obj.psi_bar, Q, h)
    return float(np.max(np.abs(flux - fd)))


@dataclass
class Assumption4Report:
    q_star: NDArray[np.float64]
    not_below_max: NDArray[np.float64]
    critical: NDArray[np.float64]
    not_inward: NDArray[np.float64]

    @property
    def condition_i(self) -> bool:
        return len(self.not_below_max) == 0

    @property
    def condition_ii(self) -> bool:
        return len(self.critical) == 0

    @property
    def condition_iii(self) -> bool:
        return len(self.not_inward) == 0

    @property
    def holds(self) -> bool:
        return self.condition_i and self.condition_ii and self.condition_iii

    def summary(self) -> dict:
        return {
            "holds": self.holds,
            "condition_i": self.condition_i,
            "condition_ii": self.condition_ii,
            "condition_iii": self.condition_iii,
            "n_not_below_max": len(self.not_below_max),
            "n_critical": len(self.critical),
            "n_not_inward": len(self.not_inward),
            "critical_points": self.critical.tolist()[:20],
        }


def check_assumption4(
    obj: AveragedObjective2D,
    q_star: ArrayLike,
    grid: tuple[ArrayLike, ArrayLike] | ArrayLike,
    C_radius: float,
    grad_tol: float = 1e-6,
) -> Assumption4Report:
    """Scan the three conditions on a grid.

    ``grid`` is either a pair of axis arrays (a tensor grid) or an ``(m, 2)``
    point array. On a tensor grid condition (ii) also flags every cell in which
    both gradient components change sign, i.e. cells that contain a critical
    point the grid nodes themselves miss. The cell holding ``q_star`` is exempt.
    """
    q_star = np.asarray(q_star, dtype=float)
    if isinstance(grid, tuple):
        xs, ys = (np.asarray(g, dtype=float) for g in grid)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        Q = np.column_stack([X.ravel(), Y.ravel()])
    else:
        xs = ys = None
        Q = np.atleast_2d(np.asarray(grid, dtype=float))
    dist = np.linalg.norm(Q - q_star, axis=1)
    Q, keep = Q[dist > 1e-12], dist > 1e-12
    top = obj.psi_bar(q_star)
    vals = obj.psi_bar(Q)
    grad = obj.grad_psi_bar(Q)
    not_below = Q[vals >= top]
    gnorm = np.linalg.norm(grad, axis=1)
    critical = [Q[gnorm <= grad_tol]]
    radial = np.einsum("ij,ij->i", grad, Q - q_star)
    outside = np.linalg.norm(Q - q_star, axis=1) > C_radius
    not_inward = Q[outside & (radial > 0)]

    if xs is not None:
        full = np.zeros((len(Q) + np.count_nonzero(~keep), 2))
        full[keep] = grad
        G = full.reshape(len(xs), len(ys), 2)
        if not keep.all():
            # q_star itself is a node; the cells around it are exempt below
            G[~keep.reshape(len(xs), len(ys))] = 0.0
        cells = []
        for comp in range(2):
            s = np.sign(G[..., comp])
            corners = np.stack([s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]])
            cells.append((corners.max(axis=0) > 0) & (corners.min(axis=0) < 0) | (corners == 0).any(axis=0))
        flagged = np.argwhere(cells[0] & cells[1])
        hx = np.diff(xs).max()
        hy = np.diff(ys).max()
        centres = []
        for i, j in flagged:
            lo = np.array([xs[i], ys[j]])
            hi = np.array([xs[i + 1], ys[j + 1]])
            if np.all(q_star >= lo - 1e-12) and np.all(q_star <= hi + 1e-12):
                continue
            centre = 0.5 * (lo + hi)
            if np.linalg.norm(centre - q_star) <= np.hypot(hx, hy):
                continue
            centres.append(centre)
        if centres:
            critical.append(np.array(centres))
    critical = np.concatenate([c.reshape(-1, 2) for c in critical]) if critical else np.zeros((0, 2))
    return Assumption4Report(q_star, not_below, critical, not_inward)


# simulation helpers

def initial_physical(q0: ArrayLike, qdot0: ArrayLike = (0.0, 0.0), eta0: float = 0.0) -> NDArray[np.float64]:
    return np.concatenate([np.asarray(q0, dtype=float), np.asarray(qdot0, dtype=float), [float(eta0)]])


def simulate_closed_loop(psi, p, b, s0, horizon, cfg: IntegratorConfig | None = None, t0: float = 0.0) -> Trajectory:
    return integrate(
        lambda s, t: closed_loop_rhs(psi, p, b, s, t), s0, t0, t0 + horizon, cfg, {"scheme": "source"}
    )


def simulate_transformed(psi, p, b, s0_physical, horizon, cfg: IntegratorConfig | None = None, t0: float = 0.0) -> Trajectory:
    """Integrate the moving-frame loop from a physical initial state."""
    z0 = to_transformed(s0_physical, p, b, t0)
    return integrate(
        lambda s, t: transformed_rhs(psi, p, b, s, t), z0, t0, t0 + horizon, cfg, {"scheme": "source-transformed"}
    )


def simulate_averaged(obj, p, state0, horizon, cfg: IntegratorConfig | None = None, t0: float = 0.0) -> Trajectory:
    return integrate(lambda s, t: averaged_rhs(obj, p, s), state0, t0, t0 + horizon, cfg, {"scheme": "averaged-source"})


def to_physical(traj: Trajectory, p: SourceParams, b: DitherBoundary) -> Trajectory:
    """Map a moving-frame trajectory back to physical coordinates, sample by sample."""
    dq, dv = frame_offset(p, b, traj.times)
    states = traj.states.copy()
    states[:, :2] += dq
    states[:, 2:4] += dv
    return Trajectory(traj.times, states, dict(traj.metadata))


def terminal_period_mean(traj: Trajectory, period: float, cols=(0, 1), n: int = 256) -> NDArray[np.float64]:
    """Mean of selected components over the final ``period`` of ``traj``."""
    t1 = traj.times[-1]
    grid = t1 - period + period * np.arange(1, n + 1) / n
    sub = resample(traj, grid)
    return sub.states[:, list(cols)].mean(axis=0)
