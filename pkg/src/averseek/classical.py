"""Classical perturbation-based extremum seeking with slow filters.

The scheme injects ``a*sin(eps*t)`` into a parametrized feedback law, high-pass
filters the plant output, demodulates, low-pass filters and integrates. With
all filter gains proportional to ``eps`` the time-scaled loop behaves, after
averaging, like a damped double integrator climbing the semicircle-kernel
average of the steady-state output map.

State vectors are laid out as ``[x_1..x_n, theta_hat, xi, eta, a]``; the
amplitude slot is constant unless amplitude decay is switched on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .averaging import (
    DEFAULT_PERIODIC_NODES,
    DEFAULT_SEMICIRCLE_NODES,
    gauss_chebyshev2_rule,
    semicircle_average,
)

ScalarFn = Callable[[ArrayLike], NDArray[np.float64]]


@dataclass(frozen=True)
class ClassicalPlant:
    """Plant ``x' = f(x, u)``, output ``y = h(x)``, feedback ``u = alpha(x, theta)``
    and the equilibrium map ``l``.

    ``psi_prime`` optionally supplies the derivative of ``h(l(theta))``; it lets
    the averaged objective differentiate by quadrature instead of differences.
    """

    n: int
    f: Callable[[NDArray[np.float64], float], NDArray[np.float64]]
    h: Callable[[NDArray[np.float64]], float]
    alpha: Callable[[NDArray[np.float64], float], float]
    l: Callable[[ArrayLike], NDArray[np.float64]]
    psi_prime: ScalarFn | None = None
    name: str = "plant"

    def check_equilibria(self, thetas: ArrayLike, tol: float = 1e-9) -> bool:
        for th in np.atleast_1d(np.asarray(thetas, dtype=float)):
            x = np.asarray(self.l(th), dtype=float)
            r = np.asarray(self.f(x, self.alpha(x, th)))
            if not np.all(np.isfinite(r)) or np.max(np.abs(r)) > tol:
                return False
        return True

    def psi(self, theta: ArrayLike) -> NDArray[np.float64]:
        return steady_state_output(self, theta)


def steady_state_output(plant: ClassicalPlant, theta: ArrayLike):
    """``h(l(theta))``, the output the plant settles to for a frozen parameter."""
    return plant.h(plant.l(theta))


@dataclass(frozen=True)
class ClassicalGains:
    eps: float
    a: float
    omega_H: float = 1.0
    omega_L: float = 1.0
    K: float = 1.0

    def __post_init__(self):
        for name in ("eps", "a", "omega_H", "omega_L", "K"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega_h(self) -> float:
        return self.eps * self.omega_H

    @property
    def omega_l(self) -> float:
        return self.eps * self.omega_L

    @property
    def k(self) -> float:
        return self.eps * self.K


@dataclass
class ClassicalState:
    x: NDArray[np.float64]
    theta_hat: float
    xi: float = 0.0
    eta: float = 0.0
    a: float = 1.0

    def to_vector(self) -> NDArray[np.float64]:
        return np.concatenate([np.asarray(self.x, dtype=float), [self.theta_hat, self.xi, self.eta, self.a]])

    @classmethod
    def from_vector(cls, v: ArrayLike, n: int) -> "ClassicalState":
        v = np.asarray(v, dtype=float)
        if v.shape != (n + 4,):
            raise ValueError(f"expected state of length {n + 4}")
        return cls(v[:n].copy(), float(v[n]), float(v[n + 1]), float(v[n + 2]), float(v[n + 3]))

    @classmethod
    def initial(cls, plant: ClassicalPlant, x0: ArrayLike, theta0: float, a: float) -> "ClassicalState":
        """``xi(0) = 0`` and ``eta(0) = y(0)``."""
        x0 = np.asarray(x0, dtype=float)
        return cls(x0, float(theta0), 0.0, float(plant.h(x0)), float(a))


def _unpack(s, n):
    return s[:n], s[n], s[n + 1], s[n + 2], s[n + 3]


def closed_loop_rhs(
    plant: ClassicalPlant,
    gains: ClassicalGains,
    s: ArrayLike,
    t: float,
    decay: bool = False,
) -> NDArray[np.float64]:
    """Right-hand side of the loop in physical time ``t``."""
    n = plant.n
    x, th, xi, eta, a = _unpack(np.asarray(s, dtype=float), n)
    e = gains.eps
    d = a * np.sin(e * t)
    y = plant.h(x)
    out = np.empty(n + 4)
    out[:n] = plant.f(x, plant.alpha(x, th + d))
    out[n] = e * gains.K * xi
    out[n + 1] = e * gains.omega_L * (-xi + (y - eta) * d)
    out[n + 2] = e * gains.omega_H * (y - eta)
    out[n + 3] = -e * e * a if decay else 0.0
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite closed-loop derivative at t={t!r}")
    return out


def time_scaled_rhs(
    plant: ClassicalPlant,
    gains: ClassicalGains,
    s: ArrayLike,
    tau: float,
    decay: bool = False,
) -> NDArray[np.float64]:
    """Same loop written in the dither time ``tau = eps * t``."""
    n = plant.n
    x, th, xi, eta, a = _unpack(np.asarray(s, dtype=float), n)
    d = a * np.sin(tau)
    y = plant.h(x)
    out = np.empty(n + 4)
    out[:n] = np.asarray(plant.f(x, plant.alpha(x, th + d))) / gains.eps
    out[n] = gains.K * xi
    out[n + 1] = gains.omega_L * (-xi + (y - eta) * d)
    out[n + 2] = gains.omega_H * (y - eta)
    out[n + 3] = -gains.eps * a if decay else 0.0
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite time-scaled derivative at tau={tau!r}")
    return out


def reduced_rhs(psi: ScalarFn, gains: ClassicalGains, state: ArrayLike, tau: float) -> NDArray[np.float64]:
    """Plant frozen at its equilibrium; state ``[theta, theta', eta]`` in ``tau``."""
    th, dth, eta = np.asarray(state, dtype=float)
    d = gains.a * np.sin(tau)
    y = float(psi(th + d))
    if not np.isfinite(y):
        raise FloatingPointError("non-finite objective value")
    return np.array(
        [
            dth,
            gains.omega_L * (-dth + gains.K * (y - eta) * d),
            gains.omega_H * (y - eta),
        ]
    )


@dataclass(frozen=True)
class AveragedObjective1D:
    """Local averages of a scalar objective for dither amplitude ``a``.

    ``G_bar`` and ``z_bar`` are dither-period averages (the quantities the loop
    actually produces); ``psi_bar`` is the semicircle-kernel average, whose
    derivative ``G_bar`` equals up to the factor ``a**2 / 2``.
    """

    psi: ScalarFn
    a: float
    dpsi: ScalarFn | None = None
    n_periodic: int = DEFAULT_PERIODIC_NODES
    n_semicircle: int = DEFAULT_SEMICIRCLE_NODES
    fd_step: float = 1e-5
    _tau: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("amplitude must be positive")
        object.__setattr__(self, "_tau", 2 * np.pi * np.arange(self.n_periodic) / self.n_periodic)

    @classmethod
    def from_plant(cls, plant: ClassicalPlant, a: float, **kw) -> "AveragedObjective1D":
        return cls(plant.psi, a, plant.psi_prime, **kw)

    def _samples(self, theta):
        th = np.asarray(theta, dtype=float)
        d = self.a * np.sin(self._tau)
        vals = np.asarray(self.psi(th[..., None] + d), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite objective sample")
        return vals, d

    def G_bar(self, theta: ArrayLike):
        vals, d = self._samples(theta)
        out = (vals * d).mean(axis=-1)
        return float(out) if out.ndim == 0 else out

    def z_bar(self, theta: ArrayLike):
        vals, _ = self._samples(theta)
        out = vals.mean(axis=-1)
        return float(out) if out.ndim == 0 else out

    def psi_bar(self, theta: ArrayLike):
        return semicircle_average(self.psi, theta, self.a, self.n_semicircle)

    def dpsi_bar(self, theta: ArrayLike):
        if self.dpsi is not None:
            return semicircle_average(self.dpsi, theta, self.a, self.n_semicircle)
        th = np.asarray(theta, dtype=float)
        h = self.fd_step
        out = (self.psi_bar(th + h) - np.asarray(self.psi_bar(th - h))) / (2 * h)
        return float(out) if np.ndim(out) == 0 else out

    def critical_points(self, lo: float, hi: float, n: int = 2001) -> NDArray[np.float64]:
        """Zeros of ``G_bar`` on ``[lo, hi]`` located by sign change and Brent's method."""
        grid = np.linspace(lo, hi, n)
        g = self.G_bar(grid)
        roots = []
        for i in range(n - 1):
            if g[i] == 0.0:
                roots.append(grid[i])
            elif g[i] * g[i + 1] < 0:
                roots.append(brentq(self.G_bar, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14))
        return np.array(roots)

    def argmax(self, lo: float, hi: float, n: int = 2001) -> float:
        cands = list(self.critical_points(lo, hi, n)) + [lo, hi]
        vals = [self.psi_bar(c) for c in cands]
        return float(cands[int(np.argmax(vals))])


def averaged_rhs(obj: AveragedObjective1D, gains: ClassicalGains, state: ArrayLike) -> NDArray[np.float64]:
    """Averaged loop in ``tau``; state ``[theta_bar, theta_bar', eta_bar]``."""
    th, dth, eta = np.asarray(state, dtype=float)
    vals, d = obj._samples(th)
    G = float((vals * d).mean())
    z = float(vals.mean())
    return np.array(
        [
            dth,
            gains.omega_L * (-dth + gains.K * G),
            gains.omega_H * (z - eta),
        ]
    )


def averaged_equilibrium(obj: AveragedObjective1D, theta_star: float) -> NDArray[np.float64]:
    return np.array([theta_star, 0.0, obj.z_bar(theta_star)])


class IdentityFit(NamedTuple):
    C_fit: float
    max_residual: float


def gradient_identity_residual(
    psi: ScalarFn, a: float, grid: ArrayLike, dpsi: ScalarFn | None = None
) -> IdentityFit:
    """Fit ``C`` in ``G_bar = C * a**2 * psi_bar'`` by least squares on ``grid``.

    Returns the fitted constant and the largest absolute residual at that
    constant. Both sides vanishing identically (constant ``psi``) yields
    ``(nan, 0.0)``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty grid")
    obj = AveragedObjective1D(psi, a, dpsi)
    G = np.asarray(obj.G_bar(grid))
    D = a * a * np.asarray(obj.dpsi_bar(grid))
    tiny = 1e-13
    if np.max(np.abs(D)) < tiny:
        if np.max(np.abs(G)) < tiny:
            return IdentityFit(float("nan"), 0.0)
        raise ValueError("degenerate grid: averaged derivative vanishes but G_bar does not")
    C = float(D @ G / (D @ D))
    return IdentityFit(C, float(np.max(np.abs(G - C * D))))


# demonstration problem: two-state plant with a quartic output

def demo_psi(theta: ArrayLike):
    th = np.asarray(theta, dtype=float)
    return -(th**4) + (8 / 15) * th**3 + (6 / 5) * th**2 + 10


def demo_dpsi(theta: ArrayLike):
    th = np.asarray(theta, dtype=float)
    return -4 * th**3 + (8 / 5) * th**2 + (12 / 5) * th


def demo_plant() -> ClassicalPlant:
    """``x1' = -x1 + x2``, ``x2' = x2 + u`` with ``u = -x1 - 4 x2 + theta``.

    The output is the quartic of ``x1 + 3 x2``; equilibria lie on
    ``l(theta) = theta/4 * [1, 1]``.
    """

    def f(x, u):
        return np.array([-x[0] + x[1], x[1] + u])

    def h(x):
        x = np.asarray(x, dtype=float)
        return demo_psi(x[..., 0] + 3 * x[..., 1])

    def alpha(x, theta):
        return -x[0] - 4 * x[1] + theta

    def l(theta):
        th = np.asarray(theta, dtype=float)
        return np.stack([th / 4, th / 4], axis=-1)

    return ClassicalPlant(2, f, h, alpha, l, psi_prime=demo_dpsi, name="demo-quartic")


def demo_psi_bar_closed_form(a: float, theta: ArrayLike):
    """Closed-form semicircle average of the demo quartic.

    Uses the semicircle moments ``E[s**2] = a**2/4`` and ``E[s**4] = a**4/8``,
    which makes the constant term ``10 + 3a**2/10 - a**4/8``.
    """
    th = np.asarray(theta, dtype=float)
    a2 = a * a
    return (
        -(th**4)
        + (8 / 15) * th**3
        + (6 / 5 - 1.5 * a2) * th**2
        + 0.4 * a2 * th
        + 10
        + 0.3 * a2
        - a2 * a2 / 8
    )


def demo_psi_bar_critical_points(a: float) -> NDArray[np.float64]:
    """Real roots of the cubic derivative of the closed form, ascending."""
    roots = np.roots([-4.0, 8 / 5, 2 * (6 / 5 - 1.5 * a * a), 0.4 * a * a])
    real = np.sort(roots[np.abs(roots.imag) < 1e-10].real)
    return real


def demo_psi_bar_argmax(a: float) -> float:
    crit = demo_psi_bar_critical_points(a)
    return float(crit[np.argmax(demo_psi_bar_closed_form(a, crit))])


@dataclass
class Assumption3Report:
    holds: bool
    theta_star: float
    violations: NDArray[np.float64]

    def summary(self) -> dict:
        return {
            "holds": self.holds,
            "theta_star": self.theta_star,
            "n_violations": int(len(self.violations)),
            "violation_range": [float(self.violations.min()), float(self.violations.max())]
            if len(self.violations)
            else None,
        }


def check_assumption3(obj: AveragedObjective1D, theta_star: float, grid: ArrayLike) -> Assumption3Report:
    """Sign scan of ``psi_bar'(theta) * (theta - theta_star) < 0`` over ``grid``.

    Grid points coinciding with ``theta_star`` are skipped.
    """
    grid = np.asarray(grid, dtype=float)
    grid = grid[np.abs(grid - theta_star) > 1e-12]
    prod = np.asarray(obj.dpsi_bar(grid)) * (grid - theta_star)
    bad = grid[prod >= 0]
    return Assumption3Report(len(bad) == 0, float(theta_star), bad)
