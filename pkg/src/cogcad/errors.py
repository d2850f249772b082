"""Exception types shared across the package."""


class CogcadError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class EmptyTrajectory(CogcadError):
    """Trajectory has no samples."""

    code = "EMPTY_TRAJECTORY"


class WindowTooLong(CogcadError):
    """Clustering window exceeds the trajectory time span."""

    code = "WINDOW_TOO_LONG"


class BadThreshold(CogcadError):
    """Hard-attention threshold outside the open interval (0, 1)."""

    code = "BAD_THRESHOLD"


class ShapeMismatch(CogcadError):
    """Array arguments disagree in shape."""

    code = "SHAPE_MISMATCH"


class KTooLarge(CogcadError):
    """Requested neighbor count is not in [1, N-1]."""

    code = "K_TOO_LARGE"


class BadLayer(CogcadError):
    """Unknown layer id for activation capture."""

    code = "BAD_LAYER"


class DivergenceDetected(CogcadError):
    """Training loss became non-finite."""

    code = "DIVERGENCE"


class ValidationError(CogcadError):
    """Input record fails schema or invariant checks."""

    code = "VALIDATION"

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
