"""Exception types with distinct CLI exit codes."""

from __future__ import annotations


class SpectregError(Exception):
    """Base class for package errors."""


class ConfigError(SpectregError):
    """Invalid configuration or parameters out of domain (CLI exit code 2)."""


class DataError(SpectregError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class AssumptionError(SpectregError):
    """A hypothesis gate failed: the requested computation's assumptions do not
    hold for the given spectrum (CLI exit code 4)."""


class ConstructionError(SpectregError):
    """An explicit construction (packing, alternative family) could not be
    completed within its stated budget."""
