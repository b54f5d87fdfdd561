"""Exception hierarchy shared by all roofcast modules.

The CLI maps these onto exit codes: ValidationError (and subclasses)
exit 2, I/O errors exit 1, InternalInvariantError exit 3.
"""


class RoofcastError(Exception):
    """Base class for all roofcast errors."""


class ValidationError(RoofcastError, ValueError):
    """Input violates a documented contract (bad value, bad range)."""


class SchemaError(ValidationError):
    """A structured input is missing required fields or carries unknown ones."""


class ParseError(ValidationError):
    """A counter file row could not be parsed; message names row and column."""


class DegenerateProfileError(ValidationError):
    """Profile has zero bytes at a memory level; arithmetic intensity undefined."""


class ConfigError(ValidationError):
    """Hardware spec or partition catalog is malformed or empty."""


class InternalInvariantError(RoofcastError):
    """A model invariant that should be unreachable was violated."""


class InfeasibleAllocationWarning(UserWarning):
    """Concurrent plans oversubscribe at least one GPU resource."""
