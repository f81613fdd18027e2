"""Exception types shared across the package."""


class VidaggError(Exception):
    """Base class for all package-specific errors."""


class FormatError(VidaggError):
    """A file does not conform to its on-disk format."""


class IntegrityError(VidaggError):
    """Structurally valid data violates a cross-record consistency rule."""


class ConvergenceError(VidaggError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
