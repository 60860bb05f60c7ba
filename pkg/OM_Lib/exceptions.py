class OMLibError(Exception):
    """
    Base class of every error raised by OM_Lib
    """


class ParameterError(OMLibError, ValueError):
    """
    Raised when a parameter bundle, flag or unit suffix is invalid
    """


class InstabilityError(OMLibError, ValueError):
    """
    Raised when the configured feedback loop is unstable (g <= -gamma or an
    unstable discrete closed loop)
    """


class NumericalError(OMLibError, RuntimeError):
    """
    Base class of failures that happen during a computation
    """


class DivergenceError(NumericalError):
    """
    Raised when the simulated state stops being finite
    """


class InsufficientDataError(NumericalError):
    """
    Raised when a series is too short for the requested resolution
    """


class NoPeakError(NumericalError):
    """
    Raised when no resonance peak is found inside the fit window
    """


class FitConvergenceError(NumericalError):
    """
    Raised when a fit does not converge within its iteration budget
    """


class DegenerateFitError(NumericalError):
    """
    Raised when a line fit has no spread in its abscissa
    """
