"""Exception hierarchy shared by every package."""


class SmallNoiseError(Exception):
    """Base class for all library errors."""


class ModelConfigError(SmallNoiseError, ValueError):
    """Malformed or inconsistent model document."""


class FieldIndexError(SmallNoiseError, IndexError):
    pass


class NonFiniteInputError(SmallNoiseError, ValueError):
    pass


class DivergedFlowError(SmallNoiseError, ArithmeticError):
    """A trajectory left the overflow guard or produced non-finite values."""


class AccuracyError(SmallNoiseError):
    """Hamiltonian conservation violated; the grid is too coarse."""


class GridMismatchError(SmallNoiseError, ValueError):
    pass


class NoAdmissibleControlError(SmallNoiseError):
    """No shooting start converged, so the target set looks unreachable."""


class DegenerateTargetError(NoAdmissibleControlError):
    """Zero control is the minimizer but its Malliavin covariance is singular."""


class BranchSwitchError(SmallNoiseError):
    pass


class AsymmetricMatrixError(SmallNoiseError, ValueError):
    pass


class BracketDepthError(SmallNoiseError, ValueError):
    pass


class HessianOracleError(SmallNoiseError):
    pass


class TargetUnreachedError(SmallNoiseError):
    """No Monte Carlo sample landed near the target point."""

    def __init__(self, message: str, nearest_distance: float):
        super().__init__(message)
        self.nearest_distance = nearest_distance


class FitError(SmallNoiseError, ValueError):
    pass
