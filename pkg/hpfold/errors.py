"""Exceptions raised by hpfold.

Every error subclasses ``ValueError`` so callers that only know the builtin
still catch them.
"""


class HPFoldError(ValueError):
    """Base class for hpfold errors."""


class SequenceError(HPFoldError):
    """An HP sequence is malformed or too short."""


class InvalidActionError(HPFoldError):
    """An action was taken that the current walk does not allow."""


class ShapeError(HPFoldError):
    """Network inputs or parameters have inconsistent shapes."""


class FeasibilityError(HPFoldError):
    """An exhaustive enumeration was requested beyond its configured bound."""


class ReplayError(HPFoldError):
    """A stored conformation does not replay to what it claims."""


class ConfigError(HPFoldError):
    """A configuration value is invalid or unknown."""
