"""Exception hierarchy shared by all curveflow modules."""


class CurveflowError(Exception):
    """Base class for every error raised by this package."""


class NonConvexError(CurveflowError, ValueError):
    """The radius of curvature is not strictly positive somewhere."""


class ClosureError(CurveflowError, ValueError):
    """A radius profile does not describe a closed curve."""

    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class InvalidPolylineError(CurveflowError, ValueError):
    pass


class GridMismatchError(CurveflowError, ValueError):
    pass


class ResolutionError(CurveflowError, ValueError):
    """The grid is too coarse for the requested input frequencies."""


class WindingMismatchError(CurveflowError, ValueError):
    pass


class NoRootError(CurveflowError, ValueError):
    """The requested elastic energy cannot be attained by any shift of the target."""


class ConfigError(CurveflowError, ValueError):
    """Schema or validation failure while reading a configuration document."""

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class FlowError(CurveflowError, RuntimeError):
    """Solver failure; carries the time and the last diagnostics record."""

    def __init__(self, message, t, diagnostics=None):
        super().__init__(f"{message} (t = {t:.6g})")
        self.t = t
        self.diagnostics = diagnostics


class PositivityError(FlowError):
    pass


class EnergyDriftError(FlowError):
    pass


class NumericalFailure(FlowError):
    pass
