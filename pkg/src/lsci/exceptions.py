"""Exception hierarchy shared by every lsci module."""


class LSCIError(Exception):
    """Base class for all errors raised by lsci."""


class GridMismatch(LSCIError, ValueError):
    """Two functions (or a function and a family) live on different grids."""


class ShapeMismatch(LSCIError, ValueError):
    """Array or table dimensions do not line up."""


class Unsupported(LSCIError, NotImplementedError):
    """The requested combination of options is not defined."""


class DegenerateCovariance(LSCIError, ValueError):
    """Weighted covariance has no spread to decompose."""


class DegenerateWeights(LSCIError, ValueError):
    """A weighting scheme produced no positive mass."""


class EmptyMeasure(LSCIError, ValueError):
    """A local measure has no finite atoms to work with."""


class EmptyCalibration(LSCIError, ValueError):
    """Calibration was requested with zero calibration pairs."""


class InsufficientCalibration(LSCIError, ValueError):
    """Too few calibration pairs for the requested miscoverage level."""


class InvalidU(LSCIError, ValueError):
    """Uniform draws passed to an inverse CDF must lie in the open interval (0, 1)."""


class EmptyEnsemble(LSCIError, ValueError):
    """A band was requested from an ensemble with no members."""


class NotFitted(LSCIError, RuntimeError):
    """A base predictor was used before being fitted."""


class SingularSystem(LSCIError, ValueError):
    """The ridge normal equations are rank deficient and unpenalized."""


class AcceptanceStalled(LSCIError, RuntimeError):
    """Rejection sampling ran out of proposals before filling the ensemble.

    The partially filled ensemble is kept on ``ensemble`` so callers can
    decide whether it is still usable.
    """

    def __init__(self, message, ensemble=None, rate=None):
        super().__init__(message)
        self.ensemble = ensemble
        self.rate = rate
