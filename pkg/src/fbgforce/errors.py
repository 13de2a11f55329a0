"""Exception types shared across the package."""


class FbgForceError(Exception):
    """Base class for all package errors."""


class ValidationError(FbgForceError, ValueError):
    """Input data or parameters violate a documented precondition."""


class CapacityError(ValidationError):
    """A force trajectory exceeds the configured measuring capacity."""


class InsufficientDataError(ValidationError):
    """Too few samples or load levels for the requested operation."""


class DegenerateDataError(FbgForceError, ValueError):
    """Data has no usable variation (zero variance, rank-deficient covariance)."""


class ModelRejectedError(FbgForceError, ValueError):
    """An assembled calibration model fails its invertibility checks."""


class AssignmentError(FbgForceError, RuntimeError):
    """Separated components cannot be assigned to distinct sensor channels."""


class ConfigurationError(FbgForceError, ValueError):
    """A configuration value makes the requested computation impossible."""
