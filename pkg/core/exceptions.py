"""
Exception hierarchy for the cavity-QED toolkit.

Each error also derives from the builtin it refines, so callers that only
know ``ValueError`` / ``OSError`` / ``RuntimeError`` keep working.
"""


class CqedError(Exception):
    """Base class for every error raised by the toolkit"""


class ParameterError(CqedError, ValueError):
    """Invalid physical input (negative rate, n_max < 1, mu <= 0, ...)"""


class DimensionError(ParameterError):
    """Operator / state shapes do not agree"""


class ConfigError(CqedError, ValueError):
    """Invalid run configuration; ``path`` names the offending key"""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvariantViolationError(CqedError, ArithmeticError):
    """Trace, Hermiticity or positivity broken beyond tolerance"""


class IntegrationError(CqedError, RuntimeError):
    """The time integrator failed"""

    def __init__(self, message, t_reached=None):
        self.t_reached = t_reached
        if t_reached is not None:
            message = f"{message} (reached t={t_reached!r} s)"
        super().__init__(message)


class NonConvergenceError(IntegrationError):
    """Emission horizon cap reached with too much residual excitation"""


class UndefinedQuantityError(CqedError, ArithmeticError):
    """Figure of merit undefined for these parameters (e.g. no emitted photon)"""


class DriftResolutionError(ParameterError):
    """Probe grid too coarse for the drift kernel"""


class RegionError(ParameterError):
    """Implantation region invalid or empty"""


class GridFormatError(CqedError, OSError):
    """Field grid file is malformed"""
