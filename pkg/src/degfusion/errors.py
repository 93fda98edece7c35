"""Exception hierarchy shared across the package."""


class DegfusionError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DegfusionError):
    """Invalid parameters, settings, or run configuration."""


class DegenerateSampleError(DegfusionError):
    """A sample (or bandwidth derived from it) has no usable variability."""


class DomainError(DegfusionError):
    """A value lies outside the domain an operation supports."""


class ShapeError(DegfusionError):
    """Array arguments have incompatible shapes or lengths."""


class NumericalOverflowError(DegfusionError):
    """A simulation produced a non-finite or runaway intermediate value."""


class ConditioningError(DegfusionError):
    """A linear system stayed non-positive-definite after nugget escalation."""


class QuadratureError(DegfusionError):
    """A numerical integration did not converge to the requested tolerance."""


class ExhaustedVariablesError(DegfusionError):
    """Every candidate variable is excluded from selection."""
