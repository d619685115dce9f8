"""Exception hierarchy shared by every driftcast module.

Plain I/O failures (file writes, permissions) are left to the builtin
``OSError`` family; everything listed here signals a contract violation
or an unrecoverable data condition specific to the pipeline.
"""


class DriftcastError(Exception):
    """Base class for all driftcast-specific errors."""


class InvalidGrid(DriftcastError):
    """Grid specification cannot produce coordinates (e.g. zero points)."""


class EmptyFrame(DriftcastError):
    """A preprocessing step removed every row or every column."""


class SchemaMismatch(DriftcastError):
    """Column names or array shapes disagree between two artifacts."""


class InsufficientData(DriftcastError):
    """Not enough rows to perform the requested operation."""


class InvalidData(DriftcastError):
    """Data violates a structural invariant (NaNs, gaps, duplicates)."""


class InvalidArgument(DriftcastError):
    """A scalar argument is out of its documented range."""


class DegenerateWindow(DriftcastError):
    """All rows of a training window are identical; variance ratio undefined."""


class ParseError(DriftcastError):
    """A payload or file does not conform to its documented format."""


class SourceUnavailable(DriftcastError):
    """A data source stayed unreachable after bounded retries."""


class NotFound(DriftcastError):
    """Cache lookup missed; the caller should fall back to a fetch."""


class NotAvailable(DriftcastError):
    """A requested comparison has no data to compare against."""
