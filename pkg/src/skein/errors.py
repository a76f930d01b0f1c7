"""Exception types shared across the package."""


class SkeinError(Exception):
    """Base class for all skein errors."""


class ParseError(SkeinError):
    """A text input could not be parsed. Carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SessionError(SkeinError):
    """A session document is malformed or fails schema validation."""
