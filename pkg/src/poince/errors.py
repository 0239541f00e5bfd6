"""Exception hierarchy for the poince package."""


class PoinceError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedFamilyError(PoinceError):
    """Marginal family cannot be used (unknown, or no Poincare basis exists)."""


class DomainError(PoinceError):
    """Evaluation point outside the support of a marginal or basis."""


class AssemblyError(PoinceError):
    """Finite-element assembly failed (e.g. non-positive density)."""


class SpectralError(PoinceError):
    """Eigenvalue solve failed or returned an unusable spectrum."""


class SingularMatrixError(PoinceError):
    """Regression matrix is rank deficient."""


class ConfigError(PoinceError):
    """Experiment configuration is invalid."""
