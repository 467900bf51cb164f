"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage/config problems exit 1, data
problems exit 2, validation failures (e.g. temporal leakage) exit 3.
"""


class EquitextError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(EquitextError):
    """The caller misused an API or supplied an invalid configuration."""


class DataError(EquitextError):
    """Input data is malformed, inconsistent, or insufficient."""


class ValidationError(EquitextError):
    """A constructed artifact failed a consistency check."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class TrainingError(EquitextError):
    """Model training failed (e.g. the loss became non-finite)."""
