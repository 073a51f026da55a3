from onsager_lab.exceptions import OnsagerLabError


class LabError(OnsagerLabError):
    """Base class for errors raised by the lab commands."""


class ConfigSchemaError(LabError, ValueError):
    """A run configuration is unreadable or does not match its schema."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}
