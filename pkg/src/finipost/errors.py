"""Package-wide error type carrying a stable short code.

Codes are part of the public contract ("empty-sample", "space-mismatch",
"bad-horizon", ...) so callers and the CLI can branch on them without
parsing messages.
"""

from __future__ import annotations

__all__ = ["FiniPostError"]


class FiniPostError(ValueError):
    def __init__(self, code: str, message: str | None = None):
        self.code = code
        super().__init__(message if message is not None else code)
