"""Exception hierarchy shared by all procflow modules."""


class ProcflowError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ProcflowError):
    """Input text or JSON could not be parsed.

    ``offset`` carries the byte/character position when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ValidationError(ProcflowError):
    """Input parsed but violates an invariant."""


class ProviderError(ProcflowError):
    """A chat/vision/embedding provider call failed after retries."""

    def __init__(self, message: str, attempts: list[str] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class DependencyError(ProcflowError):
    """A pipeline stage was run before one of its prerequisites."""

    def __init__(self, message: str, missing_stage: str):
        super().__init__(message)
        self.missing_stage = missing_stage


class AuthorizationError(ProcflowError):
    """Caller acted on a resource not assigned to them."""


class NotFoundError(ProcflowError):
    """A referenced session or item does not exist."""
