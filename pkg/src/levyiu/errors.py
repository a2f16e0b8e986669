"""Exception hierarchy shared by all modules."""


class LevyIUError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(LevyIUError, ValueError):
    """A model, domain, grid or config violates its contract."""


class QuadratureError(LevyIUError):
    """Numerical integration failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class CensoringError(LevyIUError):
    """Too many paths were still alive when the step budget ran out."""

    def __init__(self, message, censored_fraction=None):
        super().__init__(message)
        self.censored_fraction = censored_fraction


class ResourceCapExceeded(LevyIUError):
    """A simulation would exceed the configured particle-step budget."""


class GridMismatchError(LevyIUError, ValueError):
    """Two objects that must share a grid (or a time) do not."""


class PositivityError(LevyIUError):
    """A killed kernel is not strictly positive after the burn-in powers.

    This is how a violated irreducibility hypothesis (for instance a
    truncated process on a domain that is not roughly connected) surfaces.
    """

    def __init__(self, message, zero_pairs=None):
        super().__init__(message)
        self.zero_pairs = zero_pairs


class ConvergenceError(LevyIUError):
    """An iterative solver hit its iteration cap."""
