"""
Shared exception roots.
Module-specific errors subclass these so the CLI can map them to exit codes.
"""

from typing import List, Optional


class RagBenchError(Exception):
    """Base exception for every ragbench failure"""

    exit_code = 1


class ConfigError(RagBenchError):
    """Invalid configuration; carries field-level messages"""

    exit_code = 2

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []

    def __str__(self) -> str:
        base = super().__str__()
        if not self.fields:
            return base
        return base + "\n" + "\n".join(f"  - {f}" for f in self.fields)


class UsageError(RagBenchError):
    """Wrong call shape (missing query, unknown mode, ...)"""

    exit_code = 2


class InputFormatError(RagBenchError):
    """User-supplied file does not match its declared format"""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
