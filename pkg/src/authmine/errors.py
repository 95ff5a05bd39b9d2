"""Errors shared across the configuration readers."""

from __future__ import annotations


class ConfigError(ValueError):
    """A malformed configuration file; carries the offending line."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.path = path

    def __str__(self) -> str:
        where = ":".join(str(x) for x in (self.path, self.line) if x is not None)
        return f"{where}: {self.message}" if where else self.message
