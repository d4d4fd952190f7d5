"""Exception types shared across the package."""


class RidgeLimitsError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RidgeLimitsError, ValueError):
    """A parameter is outside the region where a quantity is defined."""


class ConvergenceError(RidgeLimitsError, RuntimeError):
    """An iterative solver did not reach the requested tolerance."""


class NearSingularityError(RidgeLimitsError, ValueError):
    """Aspect ratio sits inside the guard band around the interpolation
    threshold where zero-regularization quantities are unstable."""


class InfeasiblePanelError(RidgeLimitsError, ValueError):
    """Observed spectral moments cannot come from any admissible
    population spectrum at the stated aspect ratio."""


class NormalizationError(RidgeLimitsError, ValueError):
    """Recovered first moment is too far from 1 to renormalize safely."""


class DegenerateFeatureError(RidgeLimitsError, ValueError):
    """A design column has (near-)zero variance and cannot be standardized."""


class RankError(RidgeLimitsError, ValueError):
    """A solve requires full rank or better conditioning than the data has."""


class UnsupportedSigmaError(RidgeLimitsError, ValueError):
    """The requested operation needs an eigenvector convention the given
    covariance model does not carry."""


class ConfigError(RidgeLimitsError, ValueError):
    """A run configuration is malformed, inconsistent, or has unknown keys."""


class RunError(RidgeLimitsError, RuntimeError):
    """Too many replicates failed for the run to be trusted."""
