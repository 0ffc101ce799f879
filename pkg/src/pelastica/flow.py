"""Time stepping of the L2 gradient flow of the regularized energy.

Each step is linearly implicit in Fourier space: the explicit gradient is
divided by ``1 + dt S(omega)`` with the stabilizing symbol

    S(omega) = stiffness * (epsilon omega^6 + A omega^4),

where ``omega = 2 pi k / L`` is the arclength wavenumber of the
constant-speed curve and ``A`` is the largest frozen fourth-order
coefficient of the gradient.  A trial step is accepted when, after
constant-speed resampling, the energy has not increased and its decrease
covers the dissipation estimate ``||Delta gamma||^2 / dt``.  A failed
energy test halves ``dt``; a failed dissipation test doubles the stiffness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .curve import DiscreteClosedCurve, GeometryCache, build_geometry, reparametrize_constant_speed
from .diagnostics import besov_norm, higher_regularity_terms, length_bounds
from .energy import EnergyBreakdown, FlowParams, evaluate_energy, pointwise_sq
from .errors import ConfigError, CurveError, PelasticaError, StepSizeUnderflow
from .variations import assemble_gradient, l2_norm

TRACE_HEADER = "t,dt,bending_reg,p_elastic,length,total,grad_norm,L_lower_bound,L_upper_bound,fenchel_integral"


@dataclass(frozen=True)
class FlowControls:
    """Step-size control, stopping rule and output thinning of a run."""

    dt_initial: float = 1e-3
    dt_max: float = 1.0
    dt_growth: float = 2.0
    tol_stationary: float = 1e-5
    tol_energy_rise: float = 1e-10
    max_halvings: int = 40
    max_stiffness: float = 2.0**20
    snapshot_stride: int = 10
    max_steps: int = 1_000_000
    degenerate: bool = False
    regularity_diagnostics: bool = False

    def __post_init__(self):
        for key in ("dt_initial", "dt_max", "tol_stationary"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be > 0, got {getattr(self, key)}", key=key)
        if self.dt_growth < 1:
            raise ConfigError(f"dt_growth must be >= 1, got {self.dt_growth}", key="dt_growth")
        if self.snapshot_stride < 1:
            raise ConfigError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}", key="snapshot_stride")


@dataclass(frozen=True)
class FlowState:
    time: float
    curve: DiscreteClosedCurve
    energy: EnergyBreakdown
    grad_norm: float
    dt_last: float
    geometry: GeometryCache = field(repr=False, compare=False, default=None)
    gradient: np.ndarray = field(repr=False, compare=False, default=None)
    stiffness: float = field(repr=False, compare=False, default=1.0)
    dissipation: float = field(repr=False, compare=False, default=0.0)
    displacement: np.ndarray = field(repr=False, compare=False, default=None)
    resample_shift: float = field(repr=False, compare=False, default=0.0)


def _check_mode(params: FlowParams, degenerate: bool):
    if params.degenerate and not degenerate:
        raise ConfigError(
            f"epsilon={params.epsilon}, delta={params.delta} needs degenerate mode (experimental)",
            key="degenerate",
        )


def initial_state(curve: DiscreteClosedCurve, params: FlowParams, degenerate: bool = False,
                  reparametrize: bool = True) -> FlowState:
    """Resample ``curve`` to constant speed and evaluate energy and gradient."""
    _check_mode(params, degenerate)
    if reparametrize:
        curve = reparametrize_constant_speed(curve)
    geo = build_geometry(curve)
    grad = assemble_gradient(geo, params).vectors
    return FlowState(0.0, curve, evaluate_energy(geo, params), l2_norm(geo, grad), 0.0, geo, grad)


def _ensure_cached(state: FlowState, params: FlowParams) -> FlowState:
    if state.geometry is not None and state.gradient is not None:
        return state
    geo = build_geometry(state.curve)
    grad = assemble_gradient(geo, params).vectors
    return replace(state, geometry=geo, gradient=grad, grad_norm=l2_norm(geo, grad))


def _stabilizer(geo: GeometryCache, params: FlowParams) -> np.ndarray:
    """``epsilon omega^6 + A omega^4`` on the rfft wavenumbers."""
    N = geo.curve.samples
    omega = 2 * np.pi * np.arange(N // 2 + 1) / geo.length
    ksq = pointwise_sq(geo.curvature)
    w = ksq + params.delta**2
    a_max = (params.p - 1) * float(np.max(w ** ((params.p - 2) / 2)))
    coeff4 = a_max + params.epsilon * float(ksq.max())
    return params.epsilon * omega**6 + coeff4 * omega**4


def step(state: FlowState, params: FlowParams, dt_request: float, degenerate: bool = False,
         tol_energy_rise: float = 1e-10, max_halvings: int = 40, max_stiffness: float = 2.0**20) -> FlowState:
    """Advance one accepted step of size at most ``dt_request``.

    Raises
    ------
    StepSizeUnderflow
        If no step is accepted after ``max_halvings`` halvings of ``dt`` or
        the stiffness multiplier exceeds ``max_stiffness``.
    DegeneracyError
        Propagated from the gradient evaluation.
    """
    _check_mode(params, degenerate)
    state = _ensure_cached(state, params)
    geo = state.geometry
    e_old = state.energy.total
    g_hat = np.fft.rfft(state.gradient, axis=0)
    symbol = _stabilizer(geo, params)
    N = geo.curve.samples
    dt = float(dt_request)
    stiffness = max(1.0, state.stiffness / 2.0)
    halvings = 0
    last_residual = math.nan
    while True:
        update = np.fft.irfft(-dt * g_hat / (1.0 + dt * stiffness * symbol)[:, None], n=N, axis=0)
        dissipation = geo.integrate(pointwise_sq(update)) / dt
        outcome = _try_trial(geo.curve.points + update, params)
        if outcome is not None:
            new_curve, new_geo, new_energy, shift = outcome
            rise = new_energy.total - e_old
            last_residual = rise
            slack = 1e-14 * (1.0 + abs(e_old))
            if rise <= tol_energy_rise * abs(e_old):
                if -rise >= dissipation - slack:
                    grad = assemble_gradient(new_geo, params).vectors
                    return FlowState(
                        state.time + dt, new_curve, new_energy, l2_norm(new_geo, grad), dt,
                        new_geo, grad, stiffness, dissipation, update, shift,
                    )
                stiffness *= 2.0
                if stiffness <= max_stiffness:
                    continue
                raise StepSizeUnderflow(
                    f"stabilization stiffness exceeded {max_stiffness:g} at t={state.time:.6g}",
                    time=state.time, dt=dt, residual=rise,
                )
        halvings += 1
        if halvings > max_halvings:
            raise StepSizeUnderflow(
                f"no acceptable step after {max_halvings} halvings at t={state.time:.6g}",
                time=state.time, dt=dt, residual=last_residual,
            )
        dt /= 2.0


def _try_trial(points, params):
    try:
        trial = DiscreteClosedCurve(points)
        resampled = reparametrize_constant_speed(trial)
        geo = build_geometry(resampled)
    except CurveError:
        return None
    energy = evaluate_energy(geo, params)
    if not math.isfinite(energy.total):
        return None
    shift = float(np.sqrt(np.mean(pointwise_sq(resampled.points - trial.points))))
    return resampled, geo, energy, shift


# -- runs ---------------------------------------------------------------------

@dataclass(frozen=True)
class StepRecord:
    time: float
    dt: float
    energy: EnergyBreakdown
    grad_norm: float
    length_lower: float
    length_upper: float
    fenchel_integral: float
    dissipation: float

    def csv_row(self) -> str:
        e = self.energy
        values = (self.time, self.dt, e.bending_reg, e.p_elastic, e.length, e.total, self.grad_norm,
                  self.length_lower, self.length_upper, self.fenchel_integral)
        return ",".join(f"{v:.17g}" for v in values)


@dataclass(frozen=True)
class Snapshot:
    """Curve and uniform-bound diagnostics at one time."""

    time: float
    curve: DiscreteClosedCurve
    energy: EnergyBreakdown
    grad_norm: float
    fenchel_integral: float
    bending_term: float
    p_integral: float
    regularity: dict | None = None


@dataclass
class FlowTrace:
    params: FlowParams
    controls: FlowControls
    initial_energy: float
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    dissipation: float = 0.0
    bending_dissipation: float = 0.0
    kappa_besov_integral: float = 0.0
    tangential_drift: float = 0.0
    max_stiffness_used: float = 1.0
    termination: str = "running"
    failure: str | None = None
    final_state: FlowState | None = field(default=None, repr=False)

    @property
    def experimental(self) -> bool:
        return self.params.degenerate

    @property
    def final_time(self) -> float:
        return self.records[-1].time if self.records else 0.0

    def trace_csv(self) -> str:
        return "\n".join([TRACE_HEADER] + [r.csv_row() for r in self.records]) + "\n"

    def metadata(self, extra: dict | None = None) -> dict:
        p = self.params
        meta = {
            "p": p.p, "delta": p.delta, "epsilon": p.epsilon, "lambda": p.lam,
            "mode": "experimental" if self.experimental else "regularized",
            "initial_energy": self.initial_energy,
            "final_time": self.final_time,
            "accepted_steps": max(len(self.records) - 1, 0),
            "dissipation": self.dissipation,
            "bending_dissipation": self.bending_dissipation,
            "tangential_drift": self.tangential_drift,
            "max_stiffness_used": self.max_stiffness_used,
            "termination": self.termination,
        }
        if self.failure:
            meta["failure"] = self.failure
        meta.update(extra or {})
        return meta


def format_metadata(meta: dict) -> str:
    lines = []
    for key, value in meta.items():
        text = f"{value:.17g}" if isinstance(value, float) else str(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def _record(state: FlowState, trace: FlowTrace) -> StepRecord:
    geo = state.geometry
    lower, upper = length_bounds(trace.params, trace.initial_energy)
    fenchel = geo.integrate(np.sqrt(pointwise_sq(geo.curvature)))
    return StepRecord(state.time, state.dt_last, state.energy, state.grad_norm, lower, upper, fenchel,
                      trace.dissipation)


def _snapshot(state: FlowState, trace: FlowTrace, record: StepRecord) -> Snapshot:
    params = trace.params
    geo = state.geometry
    regularity = None
    if trace.controls.regularity_diagnostics:
        regularity = higher_regularity_terms(geo, params, state.gradient)
    return Snapshot(
        time=state.time, curve=state.curve, energy=state.energy, grad_norm=state.grad_norm,
        fenchel_integral=record.fenchel_integral,
        bending_term=2.0 * params.epsilon * state.energy.bending_reg,
        p_integral=params.p * state.energy.p_elastic,
        regularity=regularity,
    )


def _kappa_besov_power(geo: GeometryCache, p: float) -> float:
    return besov_norm(geo.curvature, 1.0 / (2 * p), p, geo.ds) ** p


def run(initial: DiscreteClosedCurve | FlowState, params: FlowParams, horizon: float,
        controls: FlowControls | None = None) -> FlowTrace:
    """Integrate from ``initial`` up to ``horizon`` or until stationarity.

    Solver errors do not propagate: the trace is returned up to the failure
    time with ``termination = "failure"`` and the message in ``failure``.
    """
    controls = controls or FlowControls()
    state = initial if isinstance(initial, FlowState) else initial_state(initial, params, controls.degenerate)
    state = _ensure_cached(replace(state, time=0.0), params)
    trace = FlowTrace(params, controls, state.energy.total)
    trace.final_state = state
    rec = _record(state, trace)
    trace.records.append(rec)
    trace.snapshots.append(_snapshot(state, trace, rec))
    track_kappa = controls.regularity_diagnostics
    kappa_prev = _kappa_besov_power(state.geometry, params.p) if track_kappa else 0.0
    dt = min(controls.dt_initial, horizon) if horizon > 0 else 0.0
    steps = 0
    snapshot_due = False
    while True:
        if state.grad_norm < controls.tol_stationary:
            trace.termination = "stationary"
            break
        if state.time >= horizon * (1 - 1e-14):
            trace.termination = "horizon"
            break
        if steps >= controls.max_steps:
            trace.termination = "max_steps"
            break
        dt_try = min(dt, horizon - state.time)
        third_sq = state.geometry.integrate(pointwise_sq(state.geometry.full_derivs[2]))
        try:
            new = step(state, params, dt_try, degenerate=controls.degenerate,
                       tol_energy_rise=controls.tol_energy_rise, max_halvings=controls.max_halvings,
                       max_stiffness=controls.max_stiffness)
        except PelasticaError as exc:
            trace.termination = "failure"
            trace.failure = f"{type(exc).__name__}: {exc}"
            break
        steps += 1
        trace.dissipation += new.dissipation
        trace.bending_dissipation += params.epsilon * third_sq * new.dt_last
        trace.tangential_drift += new.resample_shift
        trace.max_stiffness_used = max(trace.max_stiffness_used, new.stiffness)
        if track_kappa:
            kappa_new = _kappa_besov_power(new.geometry, params.p)
            trace.kappa_besov_integral += 0.5 * (kappa_prev + kappa_new) * new.dt_last
            kappa_prev = kappa_new
        state = new
        trace.final_state = state
        rec = _record(state, trace)
        trace.records.append(rec)
        snapshot_due = steps % controls.snapshot_stride != 0
        if not snapshot_due:
            trace.snapshots.append(_snapshot(state, trace, rec))
        if new.dt_last >= dt_try * (1 - 1e-12):
            dt = min(controls.dt_max, max(dt, new.dt_last) * controls.dt_growth)
        else:
            dt = new.dt_last
    if snapshot_due:
        trace.snapshots.append(_snapshot(state, trace, trace.records[-1]))
    return trace


# -- continuation ---------------------------------------------------------------

@dataclass(frozen=True)
class ContinuationSchedule:
    """Stages ``(epsilon_k, delta_k)`` driven toward the degenerate limit.

    Values must be non-increasing.  Stages with ``epsilon = 0`` or
    ``delta = 0`` are allowed only with ``degenerate=True``.
    """

    stages: tuple
    per_stage_time: float
    degenerate: bool = False

    def __post_init__(self):
        stages = tuple((float(e), float(d)) for e, d in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ConfigError("continuation needs at least one stage", key="stages")
        if not self.per_stage_time > 0:
            raise ConfigError(f"per_stage_time must be > 0, got {self.per_stage_time}", key="per_stage_time")
        for (e0, d0), (e1, d1) in zip(stages, stages[1:]):
            if e1 > e0 or d1 > d0:
                raise ConfigError(f"stages must be non-increasing, got {(e0, d0)} then {(e1, d1)}", key="stages")
        for e, d in stages:
            if e < 0 or d < 0:
                raise ConfigError(f"stage values must be >= 0, got {(e, d)}", key="stages")
            if (e == 0 or d == 0) and not self.degenerate:
                raise ConfigError(f"stage {(e, d)} needs degenerate mode", key="degenerate")

    @classmethod
    def geometric(cls, k_first, k_last, per_stage_time, degenerate=False, final_zero=False):
        """Stages ``epsilon = delta = 10^-k`` for ``k = k_first..k_last``."""
        stages = [(10.0**-k, 10.0**-k) for k in range(k_first, k_last + 1)]
        if final_zero:
            stages.append((0.0, 0.0))
        return cls(tuple(stages), per_stage_time, degenerate or final_zero)


@dataclass(frozen=True)
class StageComparison:
    """Distance between terminal curves of consecutive stages."""

    stage: int
    kappa_lp: float
    gamma_w1inf: float

    @property
    def distance(self) -> float:
        return self.kappa_lp + self.gamma_w1inf


@dataclass
class ContinuationResult:
    schedule: ContinuationSchedule
    traces: list = field(default_factory=list)
    comparisons: list = field(default_factory=list)
    bending_ratios: list = field(default_factory=list)
    failed_stage: int | None = None

    @property
    def final_curve(self) -> DiscreteClosedCurve:
        return self.traces[-1].final_state.curve


def stage_distance(a: DiscreteClosedCurve, b: DiscreteClosedCurve, p: float, stage: int = 0) -> StageComparison:
    """``||kappa_a - kappa_b||_{L^p} + ||gamma_a - gamma_b||_{W^{1,inf}}`` on the shared grid."""
    ga, gb = build_geometry(a, 1), build_geometry(b, 1)
    dk = np.sqrt(pointwise_sq(ga.curvature - gb.curvature))
    kappa_lp = float(np.mean(dk**p)) ** (1.0 / p)
    dg = np.sqrt(pointwise_sq(a.points - b.points)).max()
    dprime = np.sqrt(pointwise_sq(ga.full_derivs[0] * ga.speed[:, None] - gb.full_derivs[0] * gb.speed[:, None])).max()
    return StageComparison(stage, kappa_lp, float(dg + dprime))


def run_continuation(initial: DiscreteClosedCurve, base: FlowParams, schedule: ContinuationSchedule,
                     controls: FlowControls | None = None) -> ContinuationResult:
    """Run the stages of ``schedule`` in order, each warm-started from the last.

    ``run`` resamples every starting curve to constant speed, so each stage
    begins from the reparametrized terminal curve of the previous one.
    """
    controls = controls or FlowControls()
    result = ContinuationResult(schedule)
    curve = initial
    for k, (eps, delta) in enumerate(schedule.stages):
        params = base.with_regularization(eps, delta)
        stage_controls = replace(controls, degenerate=schedule.degenerate and params.degenerate)
        trace = run(curve, params, schedule.per_stage_time, stage_controls)
        result.traces.append(trace)
        T = trace.final_time
        denom = eps**0.2 * (T + 1.0)
        result.bending_ratios.append(trace.bending_dissipation / denom if denom > 0 else 0.0)
        new_curve = trace.final_state.curve
        if k > 0:
            result.comparisons.append(stage_distance(curve, new_curve, base.p, k))
        curve = new_curve
        if trace.termination == "failure":
            result.failed_stage = k
            break
    return result
