"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: config errors exit 2,
ingestion errors exit 3, numerical failures exit 4.
"""


class GpBanditError(Exception):
    """Base class for all gpbandit errors."""


class InputError(GpBanditError):
    """Invalid runtime input: dimension mismatch, empty pool, bad indices."""


class ConfigError(GpBanditError):
    """Invalid configuration value or experiment document."""


class IngestionError(GpBanditError):
    """Malformed dataset file. Carries row/column context in the message."""


class NumericalError(GpBanditError):
    """Numerical failure: Cholesky breakdown, variance below clamp threshold."""

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index
