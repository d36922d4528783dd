"""Exception and warning types raised across the package."""


class EIVError(Exception):
    """Base class for all package errors."""


class InvariantViolation(EIVError, ValueError):
    """A domain object was constructed with values breaking its contract."""


class NonvanishingViolation(EIVError, ArithmeticError):
    """The noise characteristic function is too close to zero on the needed range."""


class QuadratureFailure(EIVError, ArithmeticError):
    """Adaptive quadrature did not reach its tolerance at the maximal depth."""


class MissingFourierTransform(EIVError):
    """A target has neither an analytic nor a computable numeric transform."""


class NotIntegrable(EIVError, ValueError):
    """A target function is not absolutely integrable."""


class RatioNotIntegrable(EIVError, ValueError):
    """A target transform divided by the noise characteristic function is not in L1."""


class MomentDiverges(EIVError, ValueError):
    """An exponential moment of the noise is infinite."""


class DimensionMismatch(EIVError, ValueError):
    """A parameter vector has the wrong length."""


class UnsupportedConfiguration(EIVError, ValueError):
    """The requested estimator cannot be built for this model configuration."""


class SingularHessian(EIVError, ArithmeticError):
    """The population Hessian is numerically singular."""


class InvalidRegime(EIVError, ValueError):
    """Smoothness parameters fall outside every cell of the rate table."""


class TailNotIntegrable(EIVError, ValueError):
    """The transform tail does not decay fast enough to be integrated."""


class ConfigError(EIVError, ValueError):
    """A run configuration is malformed or references unknown keys."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SupportTruncationWarning(UserWarning):
    """Mass of a function outside its declared effective support is not negligible."""


class UnsupportedRegimeWarning(UserWarning):
    """A bandwidth formula bracket was nonpositive and the value was clamped."""


class OptimizerStalledWarning(UserWarning):
    """Local refinement stopped with the gradient norm above tolerance."""
