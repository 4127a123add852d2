"""Exception and warning types shared across the package."""


class VkgError(Exception):
    """Base class for package errors."""


class ConfigurationError(VkgError):
    """A parameter or config value violates a solver precondition."""


class DomainCoverageError(VkgError):
    """Data that may be nonzero is required outside the computational grid."""


class FieldEvaluationError(VkgError):
    """A field callback returned non-finite values.

    Carries the offending evaluation point in ``t`` and ``x``.
    """

    def __init__(self, t, x, message=None):
        self.t = t
        self.x = x
        super().__init__(message or f"non-finite field value at t={t!r}, x={x!r}")


class BoundaryContaminationWarning(UserWarning):
    """Initial-data support is too close to the grid boundary for the
    requested evolution time; returned boundary values are unreliable."""
