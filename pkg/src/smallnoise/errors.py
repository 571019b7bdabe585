"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside its admissible range."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed (factorization, division by zero, ...)."""


class BoundaryError(ValueError):
    """The kernel window at an evaluation point leaves the observation interval."""


class ResolutionError(ValueError):
    """The time grid is too coarse for the requested bandwidth."""


class ConfigError(ValueError):
    """Invalid experiment or run configuration."""


class ReplicationError(RuntimeError):
    """A Monte Carlo replication failed; carries the offending seed."""

    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed
