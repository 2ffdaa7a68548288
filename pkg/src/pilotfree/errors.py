"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid simulation or grid configuration."""


class PatternInfeasibleError(ValueError):
    """A repetition pattern does not fit the grid or collides with another layer."""


class PhaseUnresolvableError(ArithmeticError):
    """Reference correlation too small to fix the CCA phase ambiguity."""
