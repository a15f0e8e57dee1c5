"""Exception types shared across the package."""


class ProbcertError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(ProbcertError, ValueError):
    """Shape mismatch between an input, a network, or a noise model."""


class NumericOverflowError(ProbcertError, ArithmeticError):
    """A forward pass produced a non-finite intermediate or output value."""


class ModelFormatError(ProbcertError, ValueError):
    """A model file failed to parse or validate."""


class ConfigError(ProbcertError, ValueError):
    """A run configuration failed validation before any computation started."""
