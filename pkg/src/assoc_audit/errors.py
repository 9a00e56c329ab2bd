"""Exception types shared across the toolkit.

The CLI maps these onto exit statuses: DataError -> 2,
DegenerateStatisticError -> 3.
"""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class DataError(AuditError):
    """Malformed, missing, or inconsistent input data or configuration."""


class DegenerateStatisticError(AuditError):
    """A statistic is undefined for the given data (e.g. zero variance)."""
