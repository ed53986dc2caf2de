"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """Malformed or inconsistent arguments to an operation."""


class ResourceError(RuntimeError):
    """A computation would exceed a declared resource budget."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
