"""Exception taxonomy shared across the toolkit."""

from __future__ import annotations


class RazewrightError(Exception):
    """Base class for all toolkit errors."""


# --- corpus ---------------------------------------------------------------


class EmptyDocument(RazewrightError):
    pass


class ManifestError(RazewrightError):
    def __init__(self, filename: str, message: str):
        super().__init__(f"{filename}: {message}")
        self.filename = filename


# --- providers ------------------------------------------------------------


class ProviderError(RazewrightError):
    """Any failure while talking to a chat/embedding provider."""


class TransportError(ProviderError):
    pass


class ProtocolError(ProviderError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class RateLimited(ProviderError):
    def __init__(self, retry_after: float | None = None):
        super().__init__(f"rate limited (retry_after={retry_after})")
        self.retry_after = retry_after


class InvalidInput(RazewrightError):
    pass


class DimMismatch(RazewrightError):
    pass


class ZeroVector(RazewrightError):
    pass


# --- index / retrieve -----------------------------------------------------


class EmptyStore(RazewrightError):
    pass


class FormatVersionError(RazewrightError):
    pass


class TemplateError(RazewrightError):
    pass


class RetrievalError(RazewrightError):
    pass


# --- dataset --------------------------------------------------------------


class ValidationError(RazewrightError):
    """Base for instruction-entry validation failures."""


class NoJsonFound(ValidationError):
    pass


class MissingField(ValidationError):
    def __init__(self, field: str):
        super().__init__(f"missing field: {field}")
        self.field = field


class EmptyField(ValidationError):
    def __init__(self, field: str):
        super().__init__(f"empty field: {field}")
        self.field = field


class BadFieldType(ValidationError):
    def __init__(self, field: str):
        super().__init__(f"field is not a string: {field}")
        self.field = field


class InvalidRatio(RazewrightError):
    pass


# --- lora -----------------------------------------------------------------


class RankTooLarge(RazewrightError):
    pass


class ShapeMismatch(RazewrightError):
    pass


# --- metrics --------------------------------------------------------------


class EmptyCandidate(RazewrightError):
    pass


class NoReferences(RazewrightError):
    pass


class ReferenceTooShort(RazewrightError):
    pass


class UndefinedBP(RazewrightError):
    pass


# --- collab ---------------------------------------------------------------


class EmptyInput(RazewrightError):
    pass


class EmptyBody(RazewrightError):
    pass


class MissingUpstream(RazewrightError):
    def __init__(self, role: str):
        super().__init__(f"missing upstream output for role: {role}")
        self.role = role
