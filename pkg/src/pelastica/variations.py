"""L2 gradients and first variations of the curvature energies.

Gradients are normal fields and drive the flow.  The first variations
``delta_F``, ``delta_Ep`` and ``delta_length`` accept arbitrary variation
fields, tangential ones included, and are evaluated independently of the
gradients so that each can check the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import DiscreteClosedCurve, GeometryCache, build_geometry, project_normal
from .energy import FlowParams, pointwise_sq
from .errors import CurveError, DegeneracyError

# Lower bound for |kappa|^2 + delta^2 before raising it to negative powers.
ETA_CLAMP = 1e-300


@dataclass(frozen=True)
class VariationField:
    """Per-sample variation vectors ``V_j`` on the grid of a curve."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float, copy=True)
        if v.ndim != 2:
            raise CurveError(f"variation field must have shape (N, n), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True)
class GradientField:
    """``grad E`` together with its three weighted components."""

    vectors: np.ndarray
    component_f: np.ndarray
    component_ep: np.ndarray
    component_len: np.ndarray


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _geometry(curve_or_geometry, order=4) -> GeometryCache:
    if isinstance(curve_or_geometry, GeometryCache):
        if curve_or_geometry.max_normal_order >= order:
            return curve_or_geometry
        curve_or_geometry = curve_or_geometry.curve
    return build_geometry(curve_or_geometry, order)


def _field(V, geo: GeometryCache) -> np.ndarray:
    vec = V.vectors if isinstance(V, VariationField) else np.asarray(V, dtype=float)
    if vec.shape != geo.curve.points.shape:
        raise CurveError(
            f"variation field shape {vec.shape} does not match curve grid {geo.curve.points.shape}"
        )
    return vec


def l2_pairing(geometry: GeometryCache, a, b) -> float:
    """``int <a, b> ds`` with the trapezoid rule."""
    return geometry.integrate(_dot(np.asarray(a), np.asarray(b)))


def l2_norm(geometry: GeometryCache, a) -> float:
    return float(np.sqrt(max(l2_pairing(geometry, a, a), 0.0)))


def gradient_F(geometry: GeometryCache) -> np.ndarray:
    """``-(nabla^4 k + |k|^2 nabla^2 k + <nabla k, k> nabla k - 3/2 |nabla k|^2 k)``."""
    if geometry.max_normal_order < 4:
        raise CurveError(f"gradient_F needs normal derivatives up to order 4, cache holds {geometry.max_normal_order}")
    k, k1, k2, _, k4 = geometry.normal_derivs[:5]
    out = (
        k4
        + pointwise_sq(k)[:, None] * k2
        + _dot(k1, k)[:, None] * k1
        - 1.5 * pointwise_sq(k1)[:, None] * k
    )
    return -out


def gradient_Ep(geometry: GeometryCache, p: float, delta: float) -> np.ndarray:
    """L2 gradient of ``1/p int (|k|^2 + delta^2)^(p/2) ds``.

    Four terms: the ``(p-2)/2`` power times ``nabla^2 k + |k|^2 k``, the
    ``(p-2)`` and ``(p-4)(p-2)`` lines carrying ``<k, nabla k>``, and
    ``-(1/p) (|k|^2+delta^2)^(p/2) k``.

    Raises
    ------
    DegeneracyError
        If ``delta = 0``, ``2 < p < 4`` and the curvature vanishes at a
        sample, or if any coefficient is not finite.
    """
    if geometry.max_normal_order < 2:
        raise CurveError("gradient_Ep needs normal derivatives up to order 2")
    k, k1, k2 = geometry.normal_derivs[:3]
    ksq = pointwise_sq(k)
    w_raw = ksq + delta * delta
    if delta == 0 and 2 < p < 4 and np.any(w_raw <= ETA_CLAMP):
        j = int(np.argmin(w_raw))
        raise DegeneracyError(
            f"curvature vanishes at sample {j} with delta=0 and p={p} < 4; "
            "keep delta > 0 in this regime"
        )
    w = np.maximum(w_raw, ETA_CLAMP)
    k_k1 = _dot(k, k1)

    out = w[:, None] ** ((p - 2) / 2) * (k2 + ksq[:, None] * k)
    if p != 2:
        bracket = _dot(k, k2)[:, None] * k + pointwise_sq(k1)[:, None] * k + 2.0 * k_k1[:, None] * k1
        out = out + (p - 2) * w[:, None] ** ((p - 4) / 2) * bracket
        if p != 4:
            out = out + (p - 4) * (p - 2) * (w ** ((p - 6) / 2) * k_k1**2)[:, None] * k
    out = out - (w ** (p / 2))[:, None] * k / p
    if not np.all(np.isfinite(out)):
        j = int(np.argwhere(~np.isfinite(out))[0, 0])
        raise DegeneracyError(f"non-finite gradient coefficient at sample {j} (p={p}, delta={delta})")
    return out


def gradient_length(geometry: GeometryCache) -> np.ndarray:
    return -geometry.curvature


def assemble_gradient(geometry: GeometryCache, params: FlowParams) -> GradientField:
    """``epsilon grad F + grad E_delta + lambda grad L`` with its components."""
    geo = _geometry(geometry, 4 if params.epsilon else 2)
    comp_f = params.epsilon * gradient_F(geo) if params.epsilon else np.zeros_like(geo.curvature)
    comp_ep = gradient_Ep(geo, params.p, params.delta)
    comp_len = params.lam * gradient_length(geo)
    return GradientField(vectors=comp_f + comp_ep + comp_len, component_f=comp_f, component_ep=comp_ep, component_len=comp_len)


def _variation_derivs(geo: GeometryCache, V, order):
    out = [V]
    for _ in range(order):
        out.append(geo.d_s(out[-1]))
    return out


# Coefficient of <d_s V, kappa> kappa in the normal variation of nabla_s kappa.
NABLA_KAPPA_COUPLING = 3.0


def variation_of_nabla_kappa(geo: GeometryCache, V) -> np.ndarray:
    """Normal part of the first variation of ``nabla_s kappa`` in direction ``V``."""
    V = _field(V, geo)
    _, dV1, dV2, dV3 = _variation_derivs(geo, V, 3)
    tau, k, k1 = geo.tangent, geo.curvature, geo.normal_derivs[1]
    nabla_V = project_normal(dV1, tau)
    return (
        project_normal(dV3, tau)
        - 3.0 * _dot(dV2, tau)[:, None] * k
        - 3.0 * _dot(dV1, tau)[:, None] * k1
        - NABLA_KAPPA_COUPLING * _dot(nabla_V, k)[:, None] * k
        + pointwise_sq(k)[:, None] * nabla_V
    )


def variation_of_kappa(geo: GeometryCache, V) -> np.ndarray:
    """``(d_s^2 V)^perp - 2 <d_s V, tau> kappa - <d_s V, kappa> tau``."""
    V = _field(V, geo)
    _, dV1, dV2 = _variation_derivs(geo, V, 2)
    tau, k = geo.tangent, geo.curvature
    return project_normal(dV2, tau) - 2.0 * _dot(dV1, tau)[:, None] * k - _dot(dV1, k)[:, None] * tau


def delta_F(curve, V) -> float:
    """First variation of ``F = 1/2 int |nabla_s kappa|^2 ds`` along ``V``."""
    geo = _geometry(curve, 4)
    V = _field(V, geo)
    k1 = geo.normal_derivs[1]
    stretch = _dot(geo.tangent, geo.d_s(V))
    return geo.integrate(_dot(k1, variation_of_nabla_kappa(geo, V))) + 0.5 * geo.integrate(pointwise_sq(k1) * stretch)


def delta_Ep(curve, V, p: float, delta: float) -> float:
    """First variation of ``1/p int (|kappa|^2+delta^2)^(p/2) ds`` along ``V``."""
    geo = _geometry(curve, 2)
    V = _field(V, geo)
    k = geo.curvature
    w = pointwise_sq(k) + delta * delta
    stretch = _dot(geo.tangent, geo.d_s(V))
    first = geo.integrate(w ** ((p - 2) / 2) * _dot(k, variation_of_kappa(geo, V)))
    return first + geo.integrate(w ** (p / 2) * stretch) / p


def delta_length(curve, V) -> float:
    """First variation of length, ``int <tau, d_s V> ds``."""
    geo = _geometry(curve, 2)
    V = _field(V, geo)
    return geo.integrate(_dot(geo.tangent, geo.d_s(V)))


def delta_energy(curve, V, params: FlowParams) -> float:
    """``epsilon delta_F + delta_Ep + lambda delta_length``."""
    geo = _geometry(curve, 4)
    out = delta_Ep(geo, V, params.p, params.delta) + params.lam * delta_length(geo, V)
    if params.epsilon:
        out += params.epsilon * delta_F(geo, V)
    return out
