"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the supported range."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular system, eigensolver, pole)."""
