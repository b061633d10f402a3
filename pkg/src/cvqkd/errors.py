"""Exception hierarchy shared by all modules."""


class CVQKDError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CVQKDError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ParameterError(DomainError):
    """A physical parameter is out of its allowed range."""


class DimensionError(DomainError):
    """Matrix or vector shapes are inconsistent."""


class PhysicalityError(DomainError):
    """A covariance matrix violates the uncertainty relation."""


class DegenerateMeasurementError(DomainError):
    """The measured quadrature has zero (or negative) variance."""


class TruncationError(DomainError):
    """The Fock cutoff discards more probability mass than allowed."""


class EstimationError(DomainError):
    """Parameter estimation produced an unusable value."""


class AccuracyError(CVQKDError):
    """Numerical integration did not converge to the requested tolerance."""
