"""Exception types shared across the toolkit.

The names mirror the wire-level error vocabulary so loaders, matchers and
the CLI can map failures onto exit codes without string sniffing.
"""

from __future__ import annotations


class SignEvalError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(SignEvalError):
    """A document field is missing or has the wrong type/value."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


class InvariantError(SignEvalError):
    """A value is well-typed but violates a domain invariant."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}" if pointer else message)
        self.pointer = pointer
        self.message = message


class DuplicateId(SignEvalError):
    """An identifier that must be unique appears more than once."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


class UnmappedDirection(SignEvalError):
    """A direction token is outside the canonical set and synonym table."""

    def __init__(self, token: str):
        super().__init__(f"unmapped direction token: {token!r}")
        self.token = token


class EmptyPlace(SignEvalError):
    """A place label is empty after normalization."""


class EmptyCrop(SignEvalError):
    """A bounding box has no area left after clamping to the image."""


class EmptyInput(SignEvalError):
    """An embedding was requested for an empty string."""


class DimensionMismatch(SignEvalError):
    """Two embedding vectors of different dimensions were compared."""


class ProviderUnavailable(SignEvalError):
    """The embedding provider cannot be reached or rejected the request."""


class BackendUnavailable(SignEvalError):
    """A detector/recognizer endpoint failed after transport retries."""


class MalformedBackendResponse(SignEvalError):
    """A backend answered, but not in the documented wire format."""


class ConfigError(SignEvalError):
    """Invalid configuration value or unusable config file."""
