"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LatfracError(Exception):
    """Base class for library errors."""


class ArgumentError(LatfracError, ValueError):
    """Malformed or inconsistent input."""


class ResourceError(LatfracError):
    """A problem is too large for the configured limits."""


class InvalidPotentialError(ArgumentError):
    """Potential is not bounded below by its positive floor."""


class InvalidCoefficientError(ArgumentError):
    """Diffusion coefficient fails the positivity requirement."""


class NumericalError(LatfracError, ArithmeticError):
    """An algorithm failed to converge or produced non-finite values."""


class AccuracyUnsupportedError(NumericalError):
    """The requested argument lies outside the validated accuracy regime."""


class ConfigError(LatfracError):
    """Configuration file problem; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
