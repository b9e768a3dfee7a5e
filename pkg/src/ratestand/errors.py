"""Exception hierarchy for ratestand.

Every error raised by the library derives from RateStandError so callers can
catch the whole family at a pipeline boundary while tests pin the specific
class.
"""

from __future__ import annotations


class RateStandError(Exception):
    """Base class for all ratestand errors."""


class SchemaError(RateStandError, ValueError):
    """Schema definition or lookup is invalid (unknown column, bad level,
    duplicate, illegal level alphabet)."""


class IngestError(RateStandError, ValueError):
    """A data row failed validation. Carries the offending row index."""

    def __init__(self, message: str, row_index: int | None = None):
        self.row_index = row_index
        if row_index is not None:
            message = f"row {row_index}: {message}"
        super().__init__(message)


class UndefinedRateError(RateStandError, ArithmeticError):
    """A rate was requested for an empty stratum (0/0 is not a rate).

    Carries the condition that selected no individuals.
    """

    def __init__(self, message: str, condition=None):
        self.condition = condition
        super().__init__(message)


class WeightError(RateStandError, ValueError):
    """A weight measure is unusable: bad normalization, zero conditioning
    mass, or support outside the schema."""


class NestingError(RateStandError, ValueError):
    """A nesting pair is invalid (inner set not a proper subset of outer)."""


class ModelError(RateStandError, ValueError):
    """A disease-probability model's tables violate their invariants."""


class ConfigError(RateStandError, ValueError):
    """A configuration or data file is malformed or inconsistent."""
