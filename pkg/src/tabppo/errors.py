"""Package-level error types, mapped to CLI exit codes in cli.py."""


class ConfigError(Exception):
    """Invalid run configuration or flag combination (exit code 2)."""


class DataError(Exception):
    """Malformed or inconsistent input data (exit code 3)."""
