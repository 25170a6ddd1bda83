from __future__ import annotations


class ColmeError(Exception):
    """Base class for every error raised by the estimation stack."""


class ParameterError(ColmeError, ValueError):
    """Invalid numeric parameter (privacy params, variances, special-function domains)."""


class ProtocolError(ColmeError, RuntimeError):
    """Protocol ordering violated: non-increasing release times, history cap hit, channel mismatch."""


class UnsupportedConfigurationError(ColmeError, ValueError):
    pass


class ImpossibleStateError(ColmeError, ArithmeticError):
    pass


class ConfigError(ColmeError, ValueError):
    """Experiment document could not be loaded or validated."""
