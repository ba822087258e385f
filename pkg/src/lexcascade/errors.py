"""Exception types shared across the package."""


class LexcascadeError(Exception):
    """Base class for all package-specific errors."""


class UnknownUserError(LexcascadeError, KeyError):
    """A user id was queried that is not present in the graph."""

    def __init__(self, user):
        super().__init__(user)
        self.user = user

    def __str__(self):
        return f"unknown user: {self.user!r}"


class InsufficientDataError(LexcascadeError):
    """An estimate was requested from data that cannot support it."""


class ParseError(LexcascadeError, ValueError):
    """A data file could not be parsed; carries path and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class ConfigError(LexcascadeError, ValueError):
    """A run configuration is missing, malformed, or inconsistent."""


class UnstableProcessError(LexcascadeError):
    """A simulation configuration failed its branching safety check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class InitializationError(LexcascadeError):
    """Model fitting could not start from a feasible parameter point."""
