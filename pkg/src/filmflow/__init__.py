"""Viscous films between two close moving surfaces.

Subpackages cover the surface geometry, the depth-expansion coefficients,
grid operators, the two limit models (pressure-driven lubrication and
depth-averaged shear flow), the cubic-in-depth model and a scenario
harness with a command-line front end.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CFLViolation,
    ConfigInvalid,
    DegenerateParametrization,
    EpsilonTooSmall,
    FilmFlowError,
    IoFailure,
    MissingCoefficient,
    MissingFriction,
    NonPositiveGap,
    NonSPDWeight,
    SingularJacobian,
    SolverDivergence,
    TruncationTooLow,
)

__all__ = [
    "__version__",
    "CFLViolation",
    "ConfigInvalid",
    "DegenerateParametrization",
    "EpsilonTooSmall",
    "FilmFlowError",
    "IoFailure",
    "MissingCoefficient",
    "MissingFriction",
    "NonPositiveGap",
    "NonSPDWeight",
    "SingularJacobian",
    "SolverDivergence",
    "TruncationTooLow",
]
