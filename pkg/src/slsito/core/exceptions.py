"""Exception types raised by slsito.

Invalid arguments raise plain :class:`ValueError`.
"""


class ConfigurationError(ValueError):
    """An experiment, catalog entry or callback set is not usable as configured."""


class EvaluationError(ArithmeticError):
    """A callback or quadrature produced a non-finite or failed result."""
