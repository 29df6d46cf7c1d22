"""Univariate log-concave projection with exact distance functionals."""

from .dist import DiscreteDistribution, NotInP1
from .density import PiecewiseLogLinearDensity
from .solver import ProjectionResult, SolverOptions, brute_force_oracle, objective, project
from .transforms import LipschitzEnvelope, lipschitz_majorize
from .metrics import ContinuityRecord, delta_cdf, hellinger_sq, wasserstein1

__all__ = [
    "ContinuityRecord",
    "DiscreteDistribution",
    "LipschitzEnvelope",
    "NotInP1",
    "PiecewiseLogLinearDensity",
    "ProjectionResult",
    "SolverOptions",
    "brute_force_oracle",
    "delta_cdf",
    "hellinger_sq",
    "lipschitz_majorize",
    "objective",
    "project",
    "wasserstein1",
]

__version__ = "0.1.0"
