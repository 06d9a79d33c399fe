"""Exception types shared across the package."""

from __future__ import annotations


class RadSearchError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RadSearchError, ValueError):
    """A configuration or precondition was violated before any work started."""


class DataError(RadSearchError, ValueError):
    """Input data could not be ingested (bad CSV, missing values, ...)."""


class ContractViolation(RadSearchError, AssertionError):
    """An internal structural invariant was broken by the caller."""


class CacheMiss(ContractViolation):
    """The AD-tree was asked for content that was never inserted.

    This always indicates an enumeration-order bug upstream, so it is never
    silently recomputed.
    """

    def __init__(self, condition, attribute):
        self.condition = tuple(condition)
        self.attribute = attribute
        super().__init__(
            f"AD-tree cache miss: no vary node for attribute {attribute} "
            f"under condition {list(self.condition)}"
        )


class MemoryBudgetExceeded(RadSearchError, MemoryError):
    """The AD-tree grew past the configured node budget."""


class RankDeficiency(RadSearchError, ArithmeticError):
    """A least-squares design matrix is (numerically) rank deficient."""
