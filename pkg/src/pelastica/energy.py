"""Curvature energies of closed curves.

The regularized energy is

    E = epsilon * F + E_delta + lambda * L,
    F       = 1/2 int |nabla_s kappa|^2 ds,
    E_delta = 1/p int (|kappa|^2 + delta^2)^(p/2) ds,

and ``delta = epsilon = 0`` gives the plain p-elastic energy with length
penalty.  All integrals use the trapezoid rule in the curve parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import DiscreteClosedCurve, GeometryCache, build_geometry
from .errors import ConfigError


@dataclass(frozen=True)
class FlowParams:
    """Parameters ``(p, delta, epsilon, lambda)`` of the energy family.

    ``lam`` stands in for ``lambda``, which is a Python keyword.
    """

    p: float
    delta: float
    epsilon: float
    lam: float

    def __post_init__(self):
        for key, value in (("p", self.p), ("delta", self.delta), ("epsilon", self.epsilon), ("lambda", self.lam)):
            if not np.isfinite(value):
                raise ConfigError(f"{key} must be finite, got {value!r}", key=key)
        if self.p < 2:
            raise ConfigError(f"p must be >= 2, got {self.p}", key="p")
        if self.lam <= 0:
            raise ConfigError(f"lambda must be > 0, got {self.lam}", key="lambda")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}", key="delta")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}", key="epsilon")

    @property
    def degenerate(self) -> bool:
        """True when epsilon or delta vanish, i.e. outside the regularized regime."""
        return self.epsilon == 0 or self.delta == 0

    def with_regularization(self, epsilon, delta) -> "FlowParams":
        return FlowParams(p=self.p, delta=delta, epsilon=epsilon, lam=self.lam)


@dataclass(frozen=True)
class EnergyBreakdown:
    bending_reg: float
    p_elastic: float
    length: float
    total: float

    CSV_HEADER = "t,bending_reg,p_elastic,length,total"

    def csv_row(self, t: float) -> str:
        return ",".join(f"{v:.17g}" for v in (t, self.bending_reg, self.p_elastic, self.length, self.total))


def _geometry(curve_or_geometry, max_normal_order=4) -> GeometryCache:
    if isinstance(curve_or_geometry, GeometryCache):
        return curve_or_geometry
    return build_geometry(curve_or_geometry, max_normal_order)


def pointwise_sq(vectors) -> np.ndarray:
    return np.einsum("ij,ij->i", vectors, vectors)


def bending_reg(geometry: GeometryCache) -> float:
    return 0.5 * geometry.integrate(pointwise_sq(geometry.normal_derivs[1]))


def p_elastic(geometry: GeometryCache, p: float, delta: float) -> float:
    k2 = pointwise_sq(geometry.curvature)
    return geometry.integrate((k2 + delta**2) ** (p / 2)) / p


def evaluate_energy(curve, params: FlowParams) -> EnergyBreakdown:
    """Evaluate ``F``, ``E_delta``, ``L`` and the weighted total.

    ``curve`` may be a :class:`DiscreteClosedCurve` or a prebuilt
    :class:`GeometryCache`.
    """
    geo = _geometry(curve)
    f = bending_reg(geo)
    e = p_elastic(geo, params.p, params.delta)
    length = geo.length
    total = params.epsilon * f + e + params.lam * length
    return EnergyBreakdown(bending_reg=f, p_elastic=e, length=length, total=total)


def scale_invariant_norm(curve, i: int, q: float) -> float:
    """``L^(i+1-1/q) (int |nabla_s^i kappa|^q ds)^(1/q)``, invariant under rescaling."""
    if i < 0:
        raise ValueError(f"derivative index must be >= 0, got {i}")
    if q < 1:
        raise ValueError(f"integrability exponent must be >= 1, got {q}")
    geo = _geometry(curve, max(4, i))
    if i > geo.max_normal_order:
        geo = build_geometry(geo.curve, i, backend=geo.backend)
    mag = np.sqrt(pointwise_sq(geo.normal_derivs[i]))
    integral = geo.integrate(mag**q)
    return geo.length ** (i + 1 - 1 / q) * integral ** (1 / q)


def total_absolute_curvature(curve) -> float:
    """``int |kappa| ds``; at least ``2 pi`` for any closed curve."""
    geo = _geometry(curve)
    return geo.integrate(np.sqrt(pointwise_sq(geo.curvature)))


def circle_gradient_coefficient(m, p, delta, lam):
    """Coefficient ``G`` with ``grad E = G kappa`` on a circle of curvature ``m``.

    ``G(m) = m^2 (m^2+delta^2)^((p-2)/2) - (m^2+delta^2)^(p/2)/p - lambda``;
    the epsilon term vanishes on circles.
    """
    w = m * m + delta * delta
    return m * m * w ** ((p - 2) / 2) - w ** (p / 2) / p - lam


def stationary_radius(p, delta, lam) -> float:
    """Radius of the circle on which the gradient of the energy vanishes."""
    from scipy.optimize import brentq

    if delta == 0:
        return ((p - 1) / (p * lam)) ** (1 / p)
    g = lambda m: circle_gradient_coefficient(m, p, delta, lam)
    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    lo = hi
    while g(lo) > 0:
        lo /= 2
    m = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return 1.0 / m


def circle_radius_rate(R, p, delta, lam) -> float:
    """``dR/dt`` of a circle evolving under the flow: ``G(1/R) / R``."""
    return circle_gradient_coefficient(1.0 / R, p, delta, lam) / R
