"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the taxonomy small:
configuration problems, bad or missing data, and numeric blow-ups.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (bad parameter, unknown key)."""


class DataError(RuntimeError):
    """Unreadable, malformed, or out-of-contract input data."""


class NumericError(ArithmeticError):
    """A computation produced NaN/Inf where finite values are required."""
