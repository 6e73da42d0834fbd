"""Exception hierarchy shared by the simulator modules."""


class RislocError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RislocError, ValueError):
    """Invalid configuration, dimension mismatch or malformed input file."""


class GeometryError(RislocError, ValueError):
    """Coincident points, non-positive distances or singular link geometry."""


class InfeasibleDesignError(RislocError, ValueError):
    """The requested sounding design cannot be realised (e.g. empty null space)."""


class UnidentifiableGeometryError(RislocError, ArithmeticError):
    """Position information matrix is singular."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class DegenerateInputError(RislocError, ArithmeticError):
    """Estimator input carries no usable signal (all-zero channel, parallel rays)."""


class DivergenceError(RislocError, ArithmeticError):
    """Iterative estimator produced a non-finite objective."""

    def __init__(self, message, restart=None):
        super().__init__(message)
        self.restart = restart
