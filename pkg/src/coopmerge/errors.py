"""Exception types raised by the public API."""


class CoopMergeError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CoopMergeError, ValueError):
    """A numeric argument is non-finite or outside its documented domain."""


class CollisionStateError(CoopMergeError, ValueError):
    """A car-following model was evaluated with a non-positive headway."""


class ConfigError(CoopMergeError, ValueError):
    """A configuration file or scenario range is invalid or infeasible."""
