"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.  Plain ValueError is reserved for programming-level
contract violations (bad arguments to library functions).
"""

from __future__ import annotations

__all__ = ["ConfigError", "DataError", "NumericalError"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class DataError(ValueError):
    """Input data fails validation (gaps, negatives, ragged panels, ...)."""


class NumericalError(RuntimeError):
    """A numerical guard tripped (non-finite likelihood, failed init, ...)."""
