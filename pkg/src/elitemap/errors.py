"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
domain/runtime failures with 3.
"""

from __future__ import annotations


class EliteMapError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EliteMapError):
    """Raised when a config file is malformed or contains invalid values."""


class DomainError(EliteMapError):
    """Raised when a domain cannot be constructed or evaluated as requested."""


class EvaluationInvalid(EliteMapError):
    """Raised when a fitness or descriptor contains NaN/inf.

    The batch engine catches this per candidate (the candidate is discarded
    and counted); anywhere else it propagates.
    """
