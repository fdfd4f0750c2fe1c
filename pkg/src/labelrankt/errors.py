"""Exception hierarchy shared by all modules."""


class LabelRankError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LabelRankError, ValueError):
    """Input data violates a precondition (bad weight, duplicate edge, ...)."""


class ParseError(DomainError):
    """A line of an edge-list or truth file could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SequencingError(DomainError):
    """Snapshots were supplied out of order."""


class ParameterError(LabelRankError, ValueError):
    """An algorithm parameter is outside its allowed range."""
