"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`SlezipError`,
which is itself a :class:`ValueError` so callers that only care about "bad
input" can catch the builtin.
"""


class SlezipError(ValueError):
    """Base class for all package errors."""


class UnsupportedParameterError(SlezipError):
    """A model parameter lies outside the supported range (kappa >= 4, alpha >= Q, ...)."""


class InvalidGridError(SlezipError):
    """A time grid or scale schedule is malformed."""


class PointInHullError(SlezipError):
    """A point was swallowed by the Loewner hull (or lies on the slit)."""


class TraceUnresolvedError(SlezipError):
    """The trace could not be resolved at the requested time or scale."""


class DiagonalSingularityError(SlezipError):
    """A log-correlated kernel was evaluated on its diagonal."""


class ResolutionError(SlezipError):
    """Quadrature or pixel resolution is too coarse for the requested accuracy."""


class ModelError(SlezipError):
    """A covariance matrix is not positive semi-definite beyond tolerance."""


class ScheduleTooCoarseError(SlezipError):
    """An epsilon schedule did not reach the convergence tolerance."""


class SubcriticalViolationError(SlezipError):
    """Chaos parameter outside the subcritical range."""


class AlignmentError(SlezipError):
    """Probe sets of a field sample and a measure do not match."""


class DomainError(SlezipError):
    """A probe or atom lies outside the admissible domain or window."""


class RangeError(SlezipError):
    """A time argument exceeds the capacity covered by a map chain."""


class ConfigError(SlezipError):
    """Invalid experiment configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
