"""Exception family shared across the package.

Everything user-facing derives from ``ScenesiftError`` so the CLI can map
data problems to a single exit code without matching on message text.
"""
from __future__ import annotations


class ScenesiftError(Exception):
    """Base class for all errors raised on bad data or bad requests."""


class DataError(ScenesiftError):
    """Malformed or invariant-violating input data."""


class ScoringError(ScenesiftError):
    """A metric could not be computed for a scenario."""


class ConfigError(ScenesiftError):
    """Invalid configuration value or file."""
