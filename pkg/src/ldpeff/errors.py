"""Exception types raised by the library."""


class DomainError(ValueError):
    """A parameter lies outside the model's parameter interval."""


class ResourceLimitError(RuntimeError):
    """A problem is too large for exhaustive pattern enumeration."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or hit its iteration cap."""


class InvalidChannelError(RuntimeError):
    """A channel produced an observation with zero likelihood under every parameter."""
