"""Exception types shared across the package."""


class SpecmatchError(Exception):
    """Base class for all package-specific errors."""


class ParseError(SpecmatchError):
    """A mesh or data file could not be read or is malformed."""


class ValidationError(SpecmatchError):
    """A mesh or input structure violates a structural requirement."""


class DimensionError(SpecmatchError):
    """Array shapes are inconsistent with each other."""


class NumericalError(SpecmatchError):
    """A computation produced non-finite or otherwise unusable values."""


class ConvergenceError(SpecmatchError):
    """An iterative eigensolver failed to converge."""


class SolverError(SpecmatchError):
    """The map solver stopped before reaching its residual target.

    Carries the achieved relative residual in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateSpectrumError(SpecmatchError):
    """A spectrum is unusable for the requested operation (e.g. all zero)."""


class InvalidResolventPoint(SpecmatchError):
    """The resolvent evaluation point lies on the nonnegative real axis."""


class NotRescaledError(SpecmatchError):
    """Eigenvalues were expected in rescaled form (max at most 1)."""


class ConfigError(SpecmatchError):
    """A run configuration is inconsistent or incomplete."""
