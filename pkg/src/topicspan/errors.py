"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Unusable configuration: bad parameter values or config files."""


class DataError(ValueError):
    """Malformed or unusable input data."""


class InvariantError(RuntimeError):
    """An internal consistency check failed."""
