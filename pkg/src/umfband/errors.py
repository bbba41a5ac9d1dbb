"""Exception hierarchy shared across the package.

ValidationError covers bad inputs and configuration (CLI exit code 1),
NumericalError covers failures of the numerics themselves (exit code 2).
"""


class ValidationError(ValueError):
    """Invalid input data, specification, or configuration."""


class NumericalError(RuntimeError):
    """A numerical procedure failed or produced inconsistent results."""


class BoxAdequacyError(ValidationError):
    """The simulation box is too small for the requested energies."""


class CovarianceError(ValidationError):
    """A covariance model is incompatible with the requested grid."""
