"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: parse/read problems exit 2,
precondition violations exit 3, numerical failures exit 4.
"""


class ArtifactError(Exception):
    """Base class for all package errors."""


class ParseError(ArtifactError):
    """A file could not be parsed as the expected tabular format."""


class InputError(ArtifactError):
    """Input data violates a basic validity requirement (e.g. non-finite entries)."""


class DimensionError(ArtifactError):
    """Array shapes or sizes are inconsistent with the operation."""


class DomainError(ArtifactError):
    """A scalar parameter lies outside its admissible range."""


class RegimeError(ArtifactError):
    """The aspect ratio or sampling regime is unsupported for this operation."""


class InsufficientDataError(ArtifactError):
    """Too few samples for the requested estimator."""


class SingularityError(ArtifactError):
    """A matrix is singular or numerically rank deficient where full rank is required."""


class TuningError(ArtifactError):
    """Bandwidth selection failed to produce any finite risk value."""


class DegeneracyError(ArtifactError):
    """A probabilistic quantity degenerated (e.g. all posterior weights vanished)."""


class NumericalError(ArtifactError):
    """A computation produced non-finite results."""
