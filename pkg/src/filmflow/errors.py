"""Exception hierarchy shared by all solver modules."""


class FilmFlowError(Exception):
    """Base class for every error raised by the package."""


class DegenerateParametrization(FilmFlowError):
    """The chart is not regular: the tangent vectors are (nearly) parallel."""


class SingularJacobian(FilmFlowError):
    """The change-of-variable Jacobian is too ill conditioned to invert."""


class TruncationTooLow(FilmFlowError):
    """A coefficient needs a series order above the truncation order."""


class NonPositiveGap(FilmFlowError):
    """The gap field dropped below its positive lower bound."""


class NonSPDWeight(FilmFlowError):
    """A diffusion weight lost symmetric positive definiteness."""


class SolverDivergence(FilmFlowError):
    """A linear or time-stepping solve failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CFLViolation(FilmFlowError):
    """The time step exceeds the advective stability limit."""


class MissingCoefficient(FilmFlowError):
    """A coefficient family needed by an operator is not available."""


class EpsilonTooSmall(FilmFlowError):
    """The thickness parameter is too small for the finite-epsilon model."""


class MissingFriction(FilmFlowError):
    """The traction regime needs a friction coefficient and none was given."""


class ConfigInvalid(FilmFlowError):
    """A scenario configuration failed validation."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path


class IoFailure(FilmFlowError):
    """Writing or reading an artifact file failed."""
