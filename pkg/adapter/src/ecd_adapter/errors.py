"""Failure taxonomy: every adapter error maps to one CLI exit code."""


class AdapterError(Exception):
    """Base for adapter failures with a user-facing message."""


class InputError(AdapterError):
    """A file could not be read or parsed as its declared format."""


class ModelError(AdapterError):
    """A model-backed backend could not be loaded or run."""
