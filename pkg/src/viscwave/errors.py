"""Exception types shared across the workbench."""


class ViscwaveError(Exception):
    """Base class for all workbench errors."""


class StepUnderflow(ViscwaveError):
    """Flow integration would need a step below the hard floor (1e-12)."""


class NotRegularValue(ViscwaveError):
    """The requested energy is not a regular value of the symbol on the sample set."""


class LimitNotConverged(ViscwaveError):
    """Escape-function limit increments failed to contract before the time cap."""


class TooLargeForDense(ViscwaveError):
    """Operator dimension exceeds the dense-eigendecomposition budget."""


class IterationStalled(ViscwaveError):
    """An iterative solver or norm estimator failed to contract its residual."""


class NearEigenvalue(ViscwaveError):
    """Requested frequency is too close to an eigenvalue of the truncated operator."""


class NotCauchy(ViscwaveError):
    """Limiting-absorption increments failed to decrease."""


class BackendDisagreement(ViscwaveError):
    """Two propagation backends disagree beyond the cross-check tolerance."""


class ContourTooShort(ViscwaveError):
    """Contour ray truncation leaves a tail above the quadrature tolerance."""


class CutoffMismatch(ViscwaveError):
    """The inner spectral cutoff is not supported where the outer one equals 1."""


class InvalidConfig(ViscwaveError):
    """Experiment configuration failed validation; message lists the bad fields."""


class MissingMetric(ViscwaveError):
    """A result record lacks the metrics required by the requested plot kind."""
