"""Exception hierarchy with stable CLI exit codes.

Exit codes are part of the CLI contract: 0 success, 1 usage error,
2 data/schema error, 3 numerical failure, 4 trainer-hook failure.
"""

from __future__ import annotations


class P3Error(Exception):
    """Base class for all engine errors."""

    exit_code = 2


class UsageError(P3Error):
    """Bad invocation: unknown flags, missing input files."""

    exit_code = 1


class SchemaError(P3Error):
    """Malformed or inconsistent input data."""

    exit_code = 2


class EmptyOutputError(SchemaError):
    """Sample output is empty or whitespace-only."""


class EmptyActionError(SchemaError):
    """An action carries no token log-probabilities."""


class EmptyActionListError(SchemaError):
    """A score record carries no action probabilities."""


class EmptyPoolError(SchemaError):
    """No samples available for thresholding or selection."""


class DimensionMismatchError(SchemaError):
    """Feature rows of differing lengths."""


class SizeMismatchError(SchemaError):
    """Quality vector and similarity matrix disagree in size."""


class IndexOutOfRangeError(SchemaError):
    """Subset index outside the kernel, or duplicated."""


class KTooLargeError(SchemaError):
    """Requested selection size exceeds the pool."""


class MissingScoresError(SchemaError):
    """Score records do not cover every dataset sample."""


class MissingMetricError(SchemaError):
    """Curriculum metric absent from metadata or scores."""


class MissingEmbeddingError(SchemaError):
    """A selected sample has no embedding in the score records."""


class InvalidSpecError(SchemaError):
    """Synthetic-run spec failed validation."""


class NumericalError(P3Error):
    """Numerical failure in kernel or selection math."""

    exit_code = 3


class NotPSDError(NumericalError):
    """Kernel could not be repaired within the jitter budget."""


class HookFailureError(P3Error):
    """External trainer hook exited nonzero."""

    exit_code = 4

    def __init__(self, message: str, hook_exit_code: int = 1):
        super().__init__(message)
        self.hook_exit_code = hook_exit_code
