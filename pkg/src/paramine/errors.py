"""Exception hierarchy shared across the toolkit.

Exit-code mapping for the CLI: ValidationError -> 1, DataError -> 2,
anything else -> 3.
"""


class ParamineError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ParamineError):
    """Invalid input value, parameter, or configuration."""


class DataError(ParamineError):
    """Input data is malformed or inconsistent (bad file, missing sidecar line)."""


class StateError(ParamineError):
    """Operation invoked in a state that does not allow it."""
