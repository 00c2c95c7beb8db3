"""Periodic dither curves tracing the boundary of a planar averaging region."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

CurveFn = Callable[[ArrayLike], NDArray[np.float64]]


class BoundaryError(ValueError):
    """A dither curve violates one of the boundary requirements."""


def _stack(x, y):
    return np.stack([x, y], axis=-1)


def _rot_cw(v):
    # rotate by -90 degrees
    return _stack(v[..., 1], -v[..., 0])


@dataclass(frozen=True)
class DitherBoundary:
    """A smooth, zero-mean, ``T``-periodic parametrization ``u`` of the boundary of M.

    All curve callables are vectorized: a scalar ``tau`` gives shape ``(2,)``,
    an array of shape ``(n,)`` gives ``(n, 2)``. ``nu`` maps boundary points to
    outward unit normals. ``U`` is the zero-mean anti-derivative of ``u``.
    """

    T: float
    u: CurveFn
    u_dot: CurveFn
    u_ddot: CurveFn
    U: CurveFn
    nu: CurveFn
    area: float
    name: str = "custom"
    orientation: int = 1

    def speed(self, tau: ArrayLike) -> NDArray[np.float64]:
        return np.linalg.norm(self.u_dot(tau), axis=-1)

    def normal_at(self, tau: ArrayLike) -> NDArray[np.float64]:
        """Outward unit normal at ``u(tau)``."""
        return self.nu(self.u(tau))

    def nodes(self, n: int) -> NDArray[np.float64]:
        return self.T * np.arange(n) / n

    def mean(self, n: int = 1024) -> NDArray[np.float64]:
        return self.u(self.nodes(n)).mean(axis=0)

    def validate(self, n: int = 512) -> "DitherBoundary":
        """Check periodicity, zero mean, regularity, normals and ``U``.

        Returns ``self`` so constructors can chain; raises :class:`BoundaryError`
        naming the first violated requirement.
        """
        if not (self.T > 0 and self.area > 0):
            raise BoundaryError("period and area must be positive")
        if np.linalg.norm(self.u(0.0) - self.u(self.T)) > 1e-10:
            raise BoundaryError("u is not T-periodic: u(0) != u(T)")
        mean = self.mean(max(n, 1024))
        if np.linalg.norm(mean) >= 1e-9:
            raise BoundaryError(
                f"u is not zero-mean (time average {mean.tolist()}); "
                f"recenter explicitly with recentered(boundary), which shifts u by "
                f"{(-mean).tolist()} and changes the averaged region"
            )
        tau = self.nodes(n)
        speed = self.speed(tau)
        if np.min(speed) <= 0:
            raise BoundaryError("u has a vanishing derivative")
        normals = self.normal_at(tau)
        if np.max(np.abs(np.linalg.norm(normals, axis=-1) - 1.0)) > 1e-10:
            raise BoundaryError("normal field is not unit length")
        outward = np.einsum("ij,ij->i", normals, self.orientation * _rot_cw(self.u_dot(tau)))
        if np.min(outward) <= 0:
            raise BoundaryError("normal field is not outward-pointing")
        if np.linalg.norm(self.U(tau).mean(axis=0)) >= 1e-9:
            raise BoundaryError("U is not zero-mean")
        h = 1e-5 * self.T
        fd = (self.U(tau + h) - self.U(tau - h)) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(self.u(tau)))))
        if np.max(np.abs(fd - self.u(tau))) > 1e-5 * scale:
            raise BoundaryError("U is not an anti-derivative of u")
        return self

    def scaled(self, factor: float) -> "DitherBoundary":
        """The curve ``factor * u`` bounding ``factor * M``, with ``nu(p / factor)``."""
        s = float(factor)
        if not s > 0:
            raise ValueError("scale factor must be positive")
        return DitherBoundary(
            T=self.T,
            u=lambda tau: s * self.u(tau),
            u_dot=lambda tau: s * self.u_dot(tau),
            u_ddot=lambda tau: s * self.u_ddot(tau),
            U=lambda tau: s * self.U(tau),
            nu=lambda p: self.nu(np.asarray(p, dtype=float) / s),
            area=s * s * self.area,
            name=f"{self.name}*{s:g}",
            orientation=self.orientation,
        )


def circle_boundary(a: float) -> DitherBoundary:
    """Counter-clockwise circle of radius ``a``, period ``2*pi``."""
    a = float(a)
    if not a > 0:
        raise ValueError("radius must be positive")

    def nu(p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    return DitherBoundary(
        T=2 * np.pi,
        u=lambda tau: a * _stack(np.cos(tau), np.sin(tau)),
        u_dot=lambda tau: a * _stack(-np.sin(tau), np.cos(tau)),
        u_ddot=lambda tau: -a * _stack(np.cos(tau), np.sin(tau)),
        U=lambda tau: a * _stack(np.sin(tau), -np.cos(tau)),
        nu=nu,
        area=np.pi * a * a,
        name=f"circle(a={a:g})",
    )


def ellipse_boundary(a: float, b: float) -> DitherBoundary:
    """Counter-clockwise axis-aligned ellipse with semi-axes ``a`` and ``b``."""
    a, b = float(a), float(b)
    if not (a > 0 and b > 0):
        raise ValueError("semi-axes must be positive")

    def nu(p):
        p = np.asarray(p, dtype=float)
        g = _stack(p[..., 0] / a**2, p[..., 1] / b**2)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    return DitherBoundary(
        T=2 * np.pi,
        u=lambda tau: _stack(a * np.cos(tau), b * np.sin(tau)),
        u_dot=lambda tau: _stack(-a * np.sin(tau), b * np.cos(tau)),
        u_ddot=lambda tau: _stack(-a * np.cos(tau), -b * np.sin(tau)),
        U=lambda tau: _stack(a * np.sin(tau), -b * np.cos(tau)),
        nu=nu,
        area=np.pi * a * b,
        name=f"ellipse(a={a:g},b={b:g})",
    )


def from_curve(
    u: CurveFn,
    u_dot: CurveFn,
    u_ddot: CurveFn,
    T: float,
    nu: CurveFn | None = None,
    n: int = 4096,
    name: str = "custom",
    check: bool = True,
) -> DitherBoundary:
    """Build a boundary from a curve and its derivatives.

    The enclosed area comes from Green's theorem on the periodic grid. ``U`` is
    the cumulative trapezoid integral of ``u`` on ``n`` nodes with its mean
    removed, evaluated through a periodic cubic spline. Without an explicit
    ``nu`` the outward normal at a boundary point is taken from the nearest
    grid node of the curve.
    """
    T = float(T)
    tau = T * np.arange(n + 1) / n
    pts = u(tau)
    vel = u_dot(tau)
    signed = 0.5 * np.mean(pts[:-1, 0] * vel[:-1, 1] - pts[:-1, 1] * vel[:-1, 0]) * T
    orientation = 1 if signed > 0 else -1
    area = abs(signed)

    h = T / n
    W = np.zeros_like(pts)
    W[1:] = np.cumsum(0.5 * h * (pts[1:] + pts[:-1]), axis=0)
    W -= W[:-1].mean(axis=0)
    W[-1] = W[0]
    spline = CubicSpline(tau, W, axis=0, bc_type="periodic")

    def U(t):
        return spline(np.mod(t, T))

    if nu is None:
        table_pts = pts[:-1]
        table_normals = orientation * _rot_cw(vel[:-1])
        table_normals /= np.linalg.norm(table_normals, axis=-1, keepdims=True)

        def nu(p):
            p = np.asarray(p, dtype=float)
            flat = p.reshape(-1, 2)
            d = ((flat[:, None, :] - table_pts[None, :, :]) ** 2).sum(axis=-1)
            return table_normals[np.argmin(d, axis=1)].reshape(p.shape)

    b = DitherBoundary(T, u, u_dot, u_ddot, U, nu, area, name, orientation)
    return b.validate() if check else b


def recentered(b: DitherBoundary, n: int = 4096) -> DitherBoundary:
    """Shift ``u`` by minus its time average so it becomes zero-mean.

    This moves the averaging region relative to the measurement point and is
    therefore never applied implicitly.
    """
    shift = b.mean(n)
    nu0 = b.nu
    return from_curve(
        lambda tau: b.u(tau) - shift,
        b.u_dot,
        b.u_ddot,
        b.T,
        nu=lambda p: nu0(np.asarray(p, dtype=float) + shift),
        n=n,
        name=f"{b.name}-recentered",
    )
