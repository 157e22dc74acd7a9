"""Shared exception types, aligned with the CLI exit-code taxonomy."""


class TexadiffError(Exception):
    pass


class DimensionError(TexadiffError):
    """Shape or dimension-contract violation (CLI exit 3)."""


class ConfigError(TexadiffError):
    """Bad configuration value or unknown key (CLI exit 4)."""


class NumericError(TexadiffError):
    """Non-finite values where finite ones are required (CLI exit 5)."""
