from __future__ import annotations

from typing import Any, Dict


class FcdlError(Exception):
    """Base class for every error raised by the core package."""


class DimensionError(FcdlError, ValueError):
    pass


class ParameterError(FcdlError, ValueError):
    pass


class LayoutMismatchError(FcdlError, ValueError):
    pass


class CheckpointError(FcdlError, ValueError):
    pass


class ConfigError(FcdlError, ValueError):
    def __init__(self, message: str, keys: list[str] | None = None):
        super().__init__(message)
        self.keys = keys or []


class FaithfulnessViolation(FcdlError, ValueError):
    pass


class EnumerationRefused(FcdlError, ValueError):
    def __init__(self, message: str, size_report: Dict[str, Any]):
        super().__init__(message)
        self.size_report = size_report


class SystemFormatError(FcdlError, ValueError):
    pass


class TrainingError(FcdlError, RuntimeError):
    """Non-finite loss. `diagnostics` holds the loss breakdown of the failing step."""

    def __init__(self, message: str, diagnostics: Dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ClassIndexError(FcdlError, IndexError):
    pass
