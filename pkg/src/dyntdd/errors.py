"""Exception types raised by the simulator."""


class InvalidInputError(ValueError):
    """Arguments outside their documented domain (non-finite, wrong shape...)."""


class NotPSDError(InvalidInputError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class InvalidRegularizerError(InvalidInputError):
    """A regularization parameter is not strictly positive."""


class InvalidCellError(InvalidInputError):
    """A cell index does not belong to the required duplex set."""


class DegenerateScenarioError(RuntimeError):
    """The scenario produces a quantity that cannot be normalized."""


class NonConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance.

    Attributes
    ----------
    residual : float
        Last observed residual.
    quantity : str
        Name of the quantity being solved for, if known.
    """

    def __init__(self, message, residual=float("nan"), quantity=""):
        super().__init__(message)
        self.residual = residual
        self.quantity = quantity
