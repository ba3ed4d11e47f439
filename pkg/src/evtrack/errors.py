"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: validation/contract failures exit 1,
I/O problems exit 2.
"""


class EvtrackError(Exception):
    pass


class DimensionError(EvtrackError, ValueError):
    """Shapes or axes that cannot be combined; message names both sides."""


class ConfigError(EvtrackError, ValueError):
    """Invalid configuration or scenario specification."""


class ContractError(EvtrackError, ValueError):
    """A documented precondition was violated at runtime."""


class ParseError(EvtrackError, ValueError):
    """Malformed file content; message carries path (and line where known)."""


class GradCheckError(EvtrackError, AssertionError):
    """Finite-difference check could not be evaluated (non-finite output)."""
