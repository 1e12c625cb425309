"""Noise-aware transport of a single ion in a moving harmonic trap.

Trajectory synthesis, perturbative excitation under spring-constant and
position noise, moment-equation and Monte-Carlo cross-checks, and
systematic-error robustness analysis.
"""

from ._backend import BACKEND
from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    EvaluationError,
    InfeasibleError,
    InvalidDurationError,
    ShuttleKitError,
    SingularMatrixError,
    UncertaintyFloorWarning,
)
from .noise import Flicker, OrnsteinUhlenbeck, White
from .trajectories import PhysicalParams, Protocol, Trajectory, figure_params, synthesize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigurationError",
    "DivergenceError",
    "DomainError",
    "EvaluationError",
    "Flicker",
    "InfeasibleError",
    "InvalidDurationError",
    "OrnsteinUhlenbeck",
    "PhysicalParams",
    "Protocol",
    "ShuttleKitError",
    "SingularMatrixError",
    "Trajectory",
    "UncertaintyFloorWarning",
    "White",
    "figure_params",
    "synthesize",
]
