"""Exception hierarchy shared across the package."""


class MreppError(Exception):
    """Base class for all package errors."""


class BreakpointError(MreppError, ValueError):
    """Derivative requested exactly at a branch boundary of a map."""


class NonReturningError(MreppError, RuntimeError):
    """No return to the inducing set was found within the iteration cap."""


class DomainError(MreppError, ValueError):
    """Argument outside the domain of an observable or distribution."""


class InsufficientSamples(MreppError, ValueError):
    pass


class NoExceedances(MreppError, ValueError):
    pass


class NotPeriodicError(MreppError, ValueError):
    pass


class NotRepellingError(MreppError, ValueError):
    pass


class QuadratureFailure(MreppError, RuntimeError):
    pass


class OverlapError(MreppError, ValueError):
    """Intervals passed to a joint Laplace transform intersect."""


class EmptySample(MreppError, ValueError):
    pass


class TooFewPoints(MreppError, ValueError):
    pass


class ConfigError(MreppError, ValueError):
    pass


class ContainmentError(MreppError, ValueError):
    """Exceedance ball is not contained in the inducing set."""
