"""Exception hierarchy shared across the package.

Errors are split by how the CLI maps them to exit codes: bad or malformed
input is distinct from missing state (a report or index that was never
built).
"""


class VdupError(Exception):
    """Base class for all package errors."""


class ValidationError(VdupError):
    """An input violates a documented invariant."""


class ParseError(VdupError):
    """A file on disk could not be parsed; message names the offending
    field or line."""


class DuplicateReportError(VdupError):
    """A report id already exists in the corpus."""


class StateError(VdupError):
    """A required artifact (corpus, codebook, index) has not been built yet."""


class ReportNotFoundError(StateError):
    """A report id is not present in the corpus."""


class IngestionError(VdupError):
    """The external decoder or OCR command failed; carries its stderr."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ExtractionError(VdupError):
    """A frame image could not be read or is too small to featurize."""


class InsufficientDataError(ValidationError):
    """Not enough samples for the requested model size."""
