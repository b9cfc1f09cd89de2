"""Exception hierarchy shared by the engines, parsers and CLI."""
from __future__ import annotations

from typing import Optional


class KatetovError(Exception):
    """Base class for every error raised by the katetov package."""


class StructuralError(KatetovError, ValueError):
    """An element id, payload or address does not belong where it is used."""


class ContractError(KatetovError, ValueError):
    """A precondition or a declared morphism kind is violated."""


class ConfigError(KatetovError, ValueError):
    """Configuration from YAML, environment or CLI flags is unusable."""


class FormatError(KatetovError, ValueError):
    """A JSON artifact does not follow the documented format."""


class CapacityError(KatetovError, RuntimeError):
    """A size cap or level budget would be exceeded."""

    def __init__(self, message: str, *, size: Optional[int] = None, limit: Optional[int] = None) -> None:
        super().__init__(message)
        self.size = size
        self.limit = limit


class DepthExhaustedError(CapacityError):
    """A witness search ran out of budgeted tower depth."""

    def __init__(self, message: str, *, depth: int, size: Optional[int] = None, limit: Optional[int] = None) -> None:
        super().__init__(message, size=size, limit=limit)
        self.depth = depth
