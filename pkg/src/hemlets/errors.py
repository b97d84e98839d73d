"""Exception types with a stable mapping onto CLI exit codes.

FormatError -> exit 2, ValidationError (and subclasses) -> exit 3,
DivergenceError -> exit 4, plain OSError -> exit 5.
"""


class HemletsError(Exception):
    """Base class for every error raised by this package."""


class FormatError(HemletsError):
    """An input file (sample records, tensor file, config) is malformed."""


class ValidationError(HemletsError):
    """Inputs are well formed but violate a documented contract."""


class AnnotationError(ValidationError):
    """Sample annotations are inconsistent with the declared annotation kind."""


class InvalidJointError(ValidationError):
    """An operation touched a joint that carries no annotation."""


class DegenerateGeometryError(ValidationError):
    """A point configuration does not determine a unique alignment."""


class DivergenceError(HemletsError):
    """A numerical procedure produced non-finite values."""
