"""Error taxonomy shared by the library and the CLI exit-code contract."""

__all__ = ["ConfigError", "ValidationError", "ResourceLimitError"]


class ConfigError(ValueError):
    """Bad or unreadable configuration input (CLI exit code 2)."""


class ValidationError(ValueError):
    """Parameter or data violates a documented contract (CLI exit code 3)."""


class ResourceLimitError(RuntimeError):
    """Computation would exceed a configured resource cap (CLI exit code 4)."""
