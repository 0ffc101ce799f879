"""Numerical checks of the a priori estimates of the regularized flow.

Every estimate whose constant is unknown becomes a bounded-ratio check: the
ratio is reported and compared against a user-chosen cap.  Rows follow the
convention ``pass <=> lhs <= rhs + tol`` with ``margin = rhs - lhs``.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curve import DiscreteClosedCurve, GeometryCache, build_geometry
from .energy import FlowParams, evaluate_energy, pointwise_sq, scale_invariant_norm
from .variations import assemble_gradient, l2_norm


@dataclass(frozen=True)
class BesovEstimate:
    s: float
    q: float
    seminorm: float
    argmax_shift: float


@dataclass(frozen=True)
class CheckRow:
    name: str
    lhs: float
    rhs: float
    tol: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs + self.tol)


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)
    context: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.checks)

    def extend(self, rows):
        self.checks.extend(rows)

    def failures(self):
        return [row for row in self.checks if not row.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.context.items():
            buf.write(f"# {key}={value}\n")
        buf.write("check_name,lhs,rhs,margin,pass\n")
        for row in self.checks:
            buf.write(f"{row.name},{row.lhs:.17g},{row.rhs:.17g},{row.margin:.17g},{int(row.passed)}\n")
        return buf.getvalue()


# -- Besov seminorms --------------------------------------------------------

def _as_columns(values):
    u = np.asarray(values, dtype=float)
    return u[:, None] if u.ndim == 1 else u


def besov_seminorm(field_values, s: float, q: float, weights=None, chunk: int = 64) -> BesovEstimate:
    """``sup_h ||u(. + h) - u||_{L^q} / h^s`` over grid shifts ``h = k/N``.

    Parameters
    ----------
    field_values : array, shape (N,) or (N, n)
    s : float
        Smoothness exponent in ``(0, 1)``.
    q : float
        Integrability exponent, at least 1.
    weights : array, shape (N,), optional
        Quadrature weights of the ``L^q`` norm (``ds`` weights); ``1/N``
        by default.
    """
    if not 0 < s < 1:
        raise ValueError(f"smoothness exponent must lie in (0, 1), got {s}")
    if q < 1:
        raise ValueError(f"integrability exponent must be >= 1, got {q}")
    u = _as_columns(field_values)
    N = u.shape[0]
    w = np.full(N, 1.0 / N) if weights is None else np.asarray(weights, dtype=float)
    idx = np.arange(N)
    best, best_k = 0.0, 1
    for start in range(1, N // 2 + 1, chunk):
        ks = np.arange(start, min(start + chunk, N // 2 + 1))
        diff = u[(idx[None, :] + ks[:, None]) % N] - u[None, :, :]
        mag = np.sqrt(np.einsum("kjn,kjn->kj", diff, diff))
        norms = (mag**q @ w) ** (1.0 / q)
        ratios = norms / (ks / N) ** s
        j = int(np.argmax(ratios))
        if ratios[j] > best:
            best, best_k = float(ratios[j]), int(ks[j])
    return BesovEstimate(s=s, q=q, seminorm=best, argmax_shift=best_k / N)


def besov_seminorm_naive(field_values, s: float, q: float, weights=None) -> float:
    """Reference evaluation of :func:`besov_seminorm` by explicit loops over shifts and samples."""
    u = _as_columns(field_values)
    N = u.shape[0]
    w = [1.0 / N] * N if weights is None else [float(x) for x in weights]
    best = 0.0
    for k in range(1, N // 2 + 1):
        total = 0.0
        for j in range(N):
            diff = u[(j + k) % N] - u[j]
            total += w[j] * math.sqrt(float(diff @ diff)) ** q
        best = max(best, total ** (1.0 / q) / (k / N) ** s)
    return best


def besov_norm(field_values, s, q, weights=None) -> float:
    """``||u||_{L^q} + |u|_{B^s_{q,inf}}``."""
    u = _as_columns(field_values)
    N = u.shape[0]
    w = np.full(N, 1.0 / N) if weights is None else np.asarray(weights, dtype=float)
    lq = float((np.sqrt(pointwise_sq(u)) ** q @ w) ** (1.0 / q))
    return lq + besov_seminorm(u, s, q, w).seminorm


# -- higher regularity --------------------------------------------------------

def higher_regularity_terms(curve, params: FlowParams, residual_g=None) -> dict:
    """Both sides of the higher-regularity estimate for one curve.

    Returns the ``epsilon ||d_s^3 gamma||^2_{B^{1/4}_{2,inf}}`` term, the
    ``||kappa||^p_{B^{1/(2p)}_{p,inf}}`` term, ``1 + ||g||_{L^2}`` and their
    ratio.  ``residual_g`` defaults to the gradient of the energy at
    ``curve``.
    """
    geo = curve if isinstance(curve, GeometryCache) else build_geometry(curve)
    if residual_g is None:
        residual_g = assemble_gradient(geo, params).vectors
    w = geo.ds
    third = geo.full_derivs[2]
    bending = params.epsilon * besov_norm(third, 0.25, 2, w) ** 2 if params.epsilon else 0.0
    kappa_term = besov_norm(geo.curvature, 1.0 / (2 * params.p), params.p, w) ** params.p
    rhs = 1.0 + l2_norm(geo, residual_g)
    lhs = bending + kappa_term
    return {"bending_term": bending, "kappa_term": kappa_term, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs}


def higher_regularity_check(curve, params: FlowParams, residual_g=None, cap: float = 1e3) -> CheckRow:
    terms = higher_regularity_terms(curve, params, residual_g)
    return CheckRow("higher_regularity_ratio", terms["ratio"], cap, info=terms)


# -- interpolation inequality -------------------------------------------------

def interpolation_ratio(curve, i: int, k: int, q: float) -> float:
    """``||nabla^i kappa||_q / (||kappa||_2^(1-a) ||kappa||_{k,2}^a)`` in scale-invariant norms."""
    if not 0 <= i < k:
        raise ValueError(f"need 0 <= i < k, got i={i}, k={k}")
    if q < 2:
        raise ValueError(f"need q >= 2, got {q}")
    geo = curve if isinstance(curve, GeometryCache) else build_geometry(curve, max(4, k))
    alpha = (i + 0.5 - 1.0 / q) / k
    lhs = scale_invariant_norm(geo, i, q)
    k0 = scale_invariant_norm(geo, 0, 2)
    kk = sum(scale_invariant_norm(geo, j, 2) for j in range(k + 1))
    rhs = k0 ** (1 - alpha) * kk**alpha
    if rhs == 0:
        return math.inf
    return lhs / rhs


def interpolation_check(curve, i: int, k: int, q: float, cap: float = 10.0) -> CheckRow:
    ratio = interpolation_ratio(curve, i, k, q)
    info = {"anomaly": "rhs vanished"} if math.isinf(ratio) else {}
    return CheckRow(f"interpolation_i{i}_k{k}_q{q:g}", ratio, cap, info=info)


# -- Fenchel and length bounds -------------------------------------------------

def length_bounds(params: FlowParams, E0: float) -> tuple:
    p = params.p
    lower = (2 * math.pi) ** (p / (p - 1)) / (p * E0) ** (1 / (p - 1))
    return lower, E0 / params.lam


def fenchel_and_length_bounds(curve, params: FlowParams, E0: float, tol: float = 1e-6) -> list:
    """Fenchel ``2 pi <= int |kappa| ds`` and the two length bounds."""
    geo = curve if isinstance(curve, GeometryCache) else build_geometry(curve)
    total_curv = geo.integrate(np.sqrt(pointwise_sq(geo.curvature)))
    lower, upper = length_bounds(params, E0)
    return [
        CheckRow("fenchel", 2 * math.pi, total_curv, tol),
        CheckRow("length_lower", lower, geo.length, tol),
        CheckRow("length_upper", geo.length, upper, tol),
    ]


# -- monotonicity of the curvature operator --------------------------------

def curvature_flux(z, p: float, delta: float) -> np.ndarray:
    """``Phi(z) = (|z|^2 + delta^2)^((p-2)/2) z`` row-wise for ``z`` of shape (m, n)."""
    z = np.asarray(z, dtype=float)
    return (pointwise_sq(z) + delta**2)[:, None] ** ((p - 2) / 2) * z


def _monotonicity_batch(p, delta, n, trials, seed_seq):
    rng = np.random.default_rng(seed_seq)
    scale = 10.0 ** rng.uniform(-2, 2, size=(trials, 1))
    w = scale * rng.standard_normal((trials, n))
    v = np.where(rng.random((trials, 1)) < 0.5, scale, 10.0 ** rng.uniform(-2, 2, size=(trials, 1)))
    v = v * rng.standard_normal((trials, n))
    diff = w - v
    lhs = np.einsum("ij,ij->i", curvature_flux(w, p, delta) - curvature_flux(v, p, delta), diff)
    bound = 4.0 ** (1 - p) * np.sqrt(pointwise_sq(diff)) ** p
    margins = lhs - bound
    j = int(np.argmin(margins))
    return float(margins[j]), float(bound[j]), float(lhs[j])


def monotonicity_property_test(p: float, delta: float, trials: int = 100_000, seed: int = 0, n: int = 3,
                               batches: int = 4, workers: int = 1, tol: float = 1e-12) -> CheckRow:
    """Randomized check of ``<Phi(w)-Phi(v), w-v> >= 4^(1-p) |w-v|^p``.

    ``Phi(z) = (|z|^2 + delta^2)^((p-2)/2) z``.  Trials are split into
    independently seeded batches; the worst margin is a min-reduction, so
    the result does not depend on batch order or ``workers``.
    """
    children = np.random.SeedSequence(seed).spawn(batches)
    sizes = [trials // batches + (1 if b < trials % batches else 0) for b in range(batches)]
    jobs = [(p, delta, n, size, child) for size, child in zip(sizes, children) if size]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda a: _monotonicity_batch(*a), jobs))
    else:
        results = [_monotonicity_batch(*a) for a in jobs]
    margin, bound, lhs = min(results)
    return CheckRow(f"monotonicity_p{p:g}_delta{delta:g}_n{n}", bound, lhs, tol,
                    info={"worst_margin": margin, "trials": trials})


# -- finite-difference oracle ---------------------------------------------------

def default_fd_step(curve: DiscreteClosedCurve) -> float:
    return 1e-5 * (1.0 + float(np.abs(curve.points).max()))


def fd_gradient_oracle(curve: DiscreteClosedCurve, params: FlowParams, V, h: float | None = None,
                       richardson: bool = False) -> float:
    """Central difference ``(E(gamma + hV) - E(gamma - hV)) / 2h`` of the total energy.

    With ``richardson=True`` the steps ``h`` and ``h/2`` are combined to
    cancel the ``h^2`` error term.
    """
    V = np.asarray(getattr(V, "vectors", V), dtype=float)
    if h is None:
        h = default_fd_step(curve)

    def central(step):
        up = evaluate_energy(DiscreteClosedCurve(curve.points + step * V), params).total
        down = evaluate_energy(DiscreteClosedCurve(curve.points - step * V), params).total
        return (up - down) / (2 * step)

    d = central(h)
    if richardson:
        d = (4 * central(h / 2) - d) / 3
    return d


# -- checks along a flow trace ----------------------------------------------------

BOUND_SLACK = 1e-6


def stationarity_check(curve, params: FlowParams, tol_stationary: float, fields: int = 20, seed: int = 0) -> CheckRow:
    """``max |delta_V E| / ||V||`` over random smooth fields, against ``10 tol_stationary``.

    ``E`` is the energy with the run's parameters; for ``epsilon = delta = 0``
    this is ``delta_V E^(p) + lambda delta_V L``.
    """
    from .generators import random_smooth_field
    from .variations import delta_energy

    geo = curve if isinstance(curve, GeometryCache) else build_geometry(curve)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(fields):
        V = random_smooth_field(geo.curve.samples, geo.curve.ambient_dim, rng)
        worst = max(worst, abs(delta_energy(geo, V, params)) / l2_norm(geo, V))
    return CheckRow("stationarity", worst, 10 * tol_stationary, info={"fields": fields})


def holder_ratio(snapshots, E0: float, max_gap: float = 1.0) -> float:
    """Largest ``||gamma_t1 - gamma_t0||_{L^2(dx)} / (sqrt(2 E0) |t1 - t0|^(1/2))`` over snapshot pairs."""
    worst = 0.0
    for i, a in enumerate(snapshots):
        for b in snapshots[i + 1:]:
            gap = b.time - a.time
            if gap <= 0 or gap > max_gap:
                continue
            dist = math.sqrt(float(np.mean(pointwise_sq(b.curve.points - a.curve.points))))
            worst = max(worst, dist / math.sqrt(2 * E0 * gap))
    return worst


def trace_checks(trace, slack: float = BOUND_SLACK) -> list:
    """Energy monotonicity, dissipation and uniform bounds along a run.

    ``trace`` is a :class:`pelastica.flow.FlowTrace`.
    """
    params, E0 = trace.params, trace.initial_energy
    records = trace.records
    totals = np.array([r.energy.total for r in records])
    rises = np.diff(totals) / np.maximum(np.abs(totals[:-1]), 1e-300)
    lengths = np.array([r.energy.length for r in records])
    lower, upper = length_bounds(params, E0)
    eps_grad = max(2 * params.epsilon * r.energy.bending_reg for r in records)
    p_int = max(params.p * r.energy.p_elastic for r in records)
    fenchel = min(r.fenchel_integral for r in records)
    rows = [
        CheckRow("energy_rise", float(rises.max()) if rises.size else 0.0, 0.0, trace.controls.tol_energy_rise),
        CheckRow("dissipation", trace.dissipation, E0 - totals[-1], 1e-8),
        CheckRow("length_lower", lower, float(lengths.min()), slack),
        CheckRow("length_upper", float(lengths.max()), upper, slack),
        CheckRow("eps_grad_kappa", eps_grad, 2 * E0, slack),
        CheckRow("p_integral", p_int, params.p * E0, slack),
        CheckRow("fenchel", 2 * math.pi, fenchel, slack),
        CheckRow("holder_in_time", holder_ratio(trace.snapshots, E0), 1.0, 1e-6),
    ]
    if trace.termination == "stationary":
        rows.append(stationarity_check(trace.final_state.geometry, params, trace.controls.tol_stationary))
    return rows
