"""Exception hierarchy shared by all ddvc modules.

The CLI maps `ConfigError`/`ParameterError` to exit code 1 and
`FormatError` (including bitstream errors) to exit code 2.
"""

from __future__ import annotations

from typing import Any


class DDVCError(Exception):
    """Base class for all ddvc errors."""


class ParameterError(DDVCError, ValueError):
    """Invalid argument value or tensor shape."""


class ConfigError(DDVCError, ValueError):
    """Unknown configuration key or a value of the wrong type."""


class FormatError(DDVCError):
    """Input data does not follow the expected file format."""


class BitstreamError(FormatError):
    """Malformed, truncated or mismatched container data."""

    def __init__(self, message: str, frame: int | None = None) -> None:
        super().__init__(message)
        self.frame = frame


class ChecksumError(BitstreamError):
    """Payload checksum mismatch."""


class ContractError(DDVCError):
    """Operation invoked outside its documented calling contract."""


class InvariantViolation(DDVCError):
    """Internal invariant broken (sigma floor, CDF monotonicity, rates)."""


class TrainingDiverged(DDVCError):
    """Non-finite loss during training."""

    def __init__(self, message: str, diagnostics: dict[str, Any]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics
