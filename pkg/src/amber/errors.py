"""Exception types raised by the library."""


class AmberError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(AmberError, ValueError):
    """A parameter lies outside the supported range."""


class DomainError(AmberError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class DivergentPointError(DomainError):
    """The requested value is infinite (e.g. chi-squared(1) density at 0)."""


class NoUniqueThresholdError(AmberError, ValueError):
    """Both hypotheses share the same density, so no threshold separates them."""


class ApproximationInvalidError(AmberError, ValueError):
    """A closed-form approximation is not defined for the given arguments."""


class ConvergenceError(AmberError, RuntimeError):
    """An iterative or adaptive numerical procedure failed to converge.

    ``diagnostics`` carries whatever partial information was available when
    the procedure gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
