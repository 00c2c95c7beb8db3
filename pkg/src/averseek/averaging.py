"""Quadrature for the averaging constructions.

Covers periodic time averages, the semicircle-kernel average on an interval,
normalized averages over planar regions and the boundary flux integral whose
value equals ``c`` times the gradient of the region average.

Integrands are vectorized callables. One-dimensional objectives take an array
of abscissae and return an array of the same shape; planar signals take points
with a trailing axis of length 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .boundary import DitherBoundary

RuleKind = Literal["periodic-trapezoid", "gauss-chebyshev-2", "disk-polar", "user-region"]

DEFAULT_PERIODIC_NODES = 256
DEFAULT_SEMICIRCLE_NODES = 64
DEFAULT_DISK_NODES = (64, 128)


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes, positive weights and the value the weights sum to.

    For region rules ``total`` is the area of the region; for normalized rules
    it is 1.
    """

    nodes: NDArray[np.float64]
    weights: NDArray[np.float64]
    kind: RuleKind
    total: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if len(nodes) != len(weights):
            raise ValueError("nodes and weights differ in length")
        if len(weights) == 0:
            raise QuadratureError("empty quadrature rule")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - self.total) > 1e-12 * max(1.0, abs(self.total)):
            raise ValueError(f"weights sum to {weights.sum()!r}, expected {self.total!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.weights)


def _finite(values, what):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise QuadratureError(f"non-finite sample in {what}")
    return values


def periodic_rule(T: float, n: int = DEFAULT_PERIODIC_NODES) -> QuadratureRule:
    if n < 2:
        raise ValueError("periodic rule needs n >= 2")
    return QuadratureRule(T * np.arange(n) / n, np.full(n, 1.0 / n), "periodic-trapezoid")


def periodic_average(
    g: Callable[[NDArray[np.float64]], ArrayLike], T: float, n: int = DEFAULT_PERIODIC_NODES
) -> float | NDArray[np.float64]:
    """Time average of a ``T``-periodic function by the rectangle rule.

    ``g`` receives the node array and returns values with the node axis first,
    so vector-valued integrands average component-wise. Exact for
    trigonometric polynomials of degree below ``n``.
    """
    if n < 2:
        raise ValueError("periodic_average needs n >= 2")
    tau = T * np.arange(n) / n
    values = _finite(g(tau), "periodic average")
    out = values.mean(axis=0)
    return float(out) if np.ndim(out) == 0 else out


def gauss_chebyshev2_rule(n: int = DEFAULT_SEMICIRCLE_NODES) -> QuadratureRule:
    """Normalized rule for the weight ``(2/pi) * sqrt(1 - s**2)`` on [-1, 1]."""
    if n < 1:
        raise ValueError("need at least one node")
    j = np.arange(1, n + 1)
    angle = j * np.pi / (n + 1)
    weights = 2.0 / (n + 1) * np.sin(angle) ** 2
    # renormalize away the last-ulp drift so the rule sums to 1 exactly
    return QuadratureRule(np.cos(angle), weights / weights.sum(), "gauss-chebyshev-2")


def semicircle_average(
    psi: Callable[[NDArray[np.float64]], ArrayLike],
    theta: ArrayLike,
    a: float,
    n: int = DEFAULT_SEMICIRCLE_NODES,
) -> float | NDArray[np.float64]:
    """Average of ``psi`` over ``[theta - a, theta + a]`` under the semicircle kernel.

    Exact for polynomial ``psi`` of degree at most ``2n - 1``. ``theta`` may be
    an array, in which case an array of averages is returned.
    """
    if not a > 0:
        raise ValueError("averaging radius must be positive")
    rule = gauss_chebyshev2_rule(n)
    th = np.asarray(theta, dtype=float)
    vals = _finite(psi(th[..., None] + a * rule.nodes), "semicircle average")
    out = vals @ rule.weights
    return float(out) if out.ndim == 0 else out


def disk_rule(
    a: float, n_r: int = DEFAULT_DISK_NODES[0], n_phi: int = DEFAULT_DISK_NODES[1]
) -> QuadratureRule:
    """Polar rule on the closed disk of radius ``a`` centred at the origin.

    Gauss-Legendre in ``rho = r**2`` times the uniform rule in angle. The angular
    average of a smooth field is an even analytic function of ``r``, so the
    radial part converges spectrally in ``rho``.
    """
    if not a > 0:
        raise ValueError("radius must be positive")
    if n_r < 1 or n_phi < 4:
        raise ValueError("need n_r >= 1 and n_phi >= 4")
    x, w = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * a * a * (x + 1.0)
    w_rho = 0.5 * a * a * w
    r = np.sqrt(rho)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    R, P = np.meshgrid(r, phi, indexing="ij")
    W = np.outer(0.5 * w_rho, np.full(n_phi, 2 * np.pi / n_phi))
    nodes = np.column_stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()])
    weights = W.ravel()
    area = np.pi * a * a
    weights *= area / weights.sum()
    return QuadratureRule(nodes, weights, "disk-polar", total=area)


def mapped_rule(rule: QuadratureRule, matrix: ArrayLike, offset: ArrayLike = (0.0, 0.0)) -> QuadratureRule:
    """Push a region rule through the affine map ``p -> matrix @ p + offset``."""
    A = np.asarray(matrix, dtype=float).reshape(2, 2)
    det = abs(np.linalg.det(A))
    if det == 0:
        raise ValueError("singular map")
    nodes = rule.nodes @ A.T + np.asarray(offset, dtype=float)
    return QuadratureRule(nodes, rule.weights * det, "user-region", total=rule.total * det)


def region_average(
    psi: Callable[[NDArray[np.float64]], ArrayLike],
    q: ArrayLike,
    rule: QuadratureRule,
    chunk: int = 64,
) -> float | NDArray[np.float64]:
    """Normalized average of ``psi(q + p)`` over the region carried by ``rule``.

    ``q`` is a point of shape ``(2,)`` or a batch of shape ``(m, 2)``.
    """
    if len(rule) == 0:
        raise QuadratureError("empty rule")
    q = np.asarray(q, dtype=float)
    w = rule.weights / rule.weights.sum()
    if q.ndim == 1:
        return float(_finite(psi(q + rule.nodes), "region average") @ w)
    out = np.empty(len(q))
    for start in range(0, len(q), chunk):
        block = q[start : start + chunk]
        vals = _finite(psi(block[:, None, :] + rule.nodes[None, :, :]), "region average")
        out[start : start + chunk] = vals @ w
    return out


def boundary_flux(
    psi: Callable[[NDArray[np.float64]], ArrayLike],
    q: ArrayLike,
    boundary: DitherBoundary,
    c: float = 1.0,
    n: int = DEFAULT_PERIODIC_NODES,
) -> NDArray[np.float64]:
    """``(c / A) * integral over the boundary of psi(q + p) * nu(p)``.

    Evaluated as the rectangle rule in the curve parameter, with the arc length
    element ``|u'(tau)| dtau``. ``q`` may be a single point or an ``(m, 2)``
    batch; the result has the same shape.
    """
    if n < 8:
        raise ValueError("boundary_flux needs n >= 8")
    tau = boundary.nodes(n)
    pts = boundary.u(tau)
    speed = boundary.speed(tau)
    if np.any(speed == 0):
        raise QuadratureError("dither curve has zero speed at a quadrature node")
    kernel = (speed[:, None] * boundary.normal_at(tau)) * (boundary.T / n)
    q = np.asarray(q, dtype=float)
    scale = c / boundary.area
    vals = _finite(psi(q[..., None, :] + pts), "boundary flux")
    return scale * np.einsum("...j,jk->...k", vals, kernel)


def boundary_mean(
    psi: Callable[[NDArray[np.float64]], ArrayLike],
    q: ArrayLike,
    boundary: DitherBoundary,
    n: int = DEFAULT_PERIODIC_NODES,
) -> float | NDArray[np.float64]:
    """Time average of ``psi(q + u(tau))`` over one dither period."""
    tau = boundary.nodes(n)
    q = np.asarray(q, dtype=float)
    vals = _finite(psi(q[..., None, :] + boundary.u(tau)), "boundary mean")
    out = vals.mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def fd_gradient(
    f: Callable[[NDArray[np.float64]], ArrayLike], q: ArrayLike, h: float = 1e-4
) -> NDArray[np.float64]:
    """Central-difference gradient of a planar scalar field; ``f`` takes ``(m, 2)`` batches."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    e = np.eye(2) * h
    cols = []
    for k in range(2):
        cols.append((np.asarray(f(q + e[k])) - np.asarray(f(q - e[k]))) / (2 * h))
    return np.column_stack(cols)
