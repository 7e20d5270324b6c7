"""Exception types shared across the package.

The CLI maps these onto stable exit codes (usage 2, data 3, numerical 4).
"""


class UsageError(ValueError):
    """Invalid configuration or flag combination."""


class DataError(ValueError):
    """Input data is malformed or degenerate (parsing, shapes, no variation)."""


class NumericalError(ValueError):
    """A numerical requirement failed (singular block, no residual df, non-PD)."""
