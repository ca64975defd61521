"""Exception types raised across the package."""


class SVMMAError(Exception):
    """Base class for all package errors."""


class DataError(SVMMAError, ValueError):
    """Malformed input data (CSV parsing, transforms, splits)."""


class SingularLocalFit(SVMMAError, ArithmeticError):
    """A local weighted normal-equation system is (numerically) singular.

    Attributes
    ----------
    location : ndarray or None
        The regression point where the fit failed.
    bandwidth : float or None
    support : int or None
        Number of observations carrying nonzero kernel weight at ``location``.
    index : int or None
        Row index of the offending location, when it is a data location.
    """

    def __init__(self, message, location=None, bandwidth=None, support=None, index=None):
        super().__init__(message)
        self.location = location
        self.bandwidth = bandwidth
        self.support = support
        self.index = index


class NoValidBandwidth(SVMMAError):
    """Every bandwidth on the search grid produced a singular leave-one-out fit."""


class DegenerateDof(SVMMAError, ArithmeticError):
    """Hat-matrix trace reaches the sample size; residual variance undefined."""


class NoConvergence(SVMMAError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonFiniteInput(SVMMAError, ValueError):
    pass
