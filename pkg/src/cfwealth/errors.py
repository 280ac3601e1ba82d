"""Exception types shared across the package."""


class InvalidDimensionError(ValueError):
    """Number of agents (or coordinates) is too small or inconsistent."""


class DomainError(ValueError):
    """Argument lies outside the domain of a distribution function."""


class NonFiniteDensityError(ValueError):
    """Density is infinite at the requested point."""


class EmptyPreimageError(ValueError):
    """No state maps to the target under the given coagulation-fragmentation pair."""


class StateSpaceTooLargeError(ValueError):
    """Enumerating the state space would exceed the configured cap."""


class ConvergenceError(RuntimeError):
    """Iterative procedure did not converge within its iteration budget."""


class InteriorRequiredError(ValueError):
    """Operation needs points strictly inside the simplex."""


class InsufficientDataError(ValueError):
    """Too few observations to compute the requested statistic."""


class StepSizeError(RuntimeError):
    """Time step produced an invalid (negative) density.

    ``suggested_dt`` carries a smaller step that should be tried instead.
    """

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt
