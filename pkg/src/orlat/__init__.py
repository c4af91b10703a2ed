"""Weighted contact process, SIR model and branching process on the
oriented lattice: simulators, mean-field solvers and an experiment harness."""

__version__ = "0.1.0"

from .errors import OrlatError
from .meanfield import critical_rate, solve_theta, survival_limit
from .stats import SurvivalEstimate, wilson_interval
from .weights import Environment, WeightSpec, constant, expect, sample, validate, vertex_weight

__all__ = [
    "Environment",
    "OrlatError",
    "SurvivalEstimate",
    "WeightSpec",
    "__version__",
    "constant",
    "critical_rate",
    "expect",
    "sample",
    "solve_theta",
    "survival_limit",
    "validate",
    "vertex_weight",
    "wilson_interval",
]
