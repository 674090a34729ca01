"""Exception types shared across the package."""


class DivergelexError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecordError(DivergelexError):
    """An input record is missing required fields or has wrong types."""


class GroupCountError(DivergelexError):
    """A corpus does not contain exactly two distinct group tags."""


class EmptyVocabularyError(DivergelexError):
    """No token survived the frequency threshold."""


class UnknownWordError(DivergelexError):
    """A queried word is not in the vocabulary."""


class ZeroVectorError(DivergelexError):
    """Cosine similarity requested for an all-zero vector."""


class NonFiniteLossError(DivergelexError):
    """Training loss became NaN or infinite."""


class MalformedFileError(DivergelexError):
    """A vector or sidecar file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyProjectionError(DivergelexError):
    """No neighbor of an interpreting set survives projection into the global space."""


class EmptyCandidateSetError(DivergelexError):
    """The candidate word set for a divergence run is empty."""


class InfeasibleSpecError(DivergelexError):
    """A synthetic corpus specification cannot be satisfied."""
