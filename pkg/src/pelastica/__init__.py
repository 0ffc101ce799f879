"""Regularized p-elastic flow of closed curves in R^n.

The package discretizes closed curves on a uniform periodic grid, evaluates
the regularized p-elastic energy with its L2 gradient and first variations,
time-steps the gradient flow with constant-speed resampling, and checks the
a priori estimates of the flow numerically.
"""

from .curve import (
    DiscreteClosedCurve,
    GeometryCache,
    build_geometry,
    curve_length,
    differentiate,
    dumps_curve,
    loads_curve,
    reparametrize_constant_speed,
)
from .energy import EnergyBreakdown, FlowParams, evaluate_energy, scale_invariant_norm, stationary_radius
from .errors import ConfigError, CurveError, DegeneracyError, PelasticaError, StepSizeUnderflow
from .flow import ContinuationSchedule, FlowControls, FlowState, FlowTrace, run, run_continuation, step
from .variations import (
    VariationField,
    assemble_gradient,
    delta_Ep,
    delta_energy,
    delta_F,
    delta_length,
    gradient_Ep,
    gradient_F,
    gradient_length,
)

__all__ = [
    "ConfigError", "ContinuationSchedule", "CurveError", "DegeneracyError", "DiscreteClosedCurve",
    "EnergyBreakdown", "FlowControls", "FlowParams", "FlowState", "FlowTrace", "GeometryCache",
    "PelasticaError", "StepSizeUnderflow", "VariationField", "assemble_gradient", "build_geometry",
    "curve_length", "delta_Ep", "delta_F", "delta_energy", "delta_length", "differentiate", "dumps_curve",
    "evaluate_energy", "gradient_Ep", "gradient_F", "gradient_length", "loads_curve",
    "reparametrize_constant_speed", "run", "run_continuation", "scale_invariant_norm", "stationary_radius",
    "step",
]
