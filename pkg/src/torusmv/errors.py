"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Operands live on incompatible discretizations."""


class ResolutionError(ValueError):
    """The grid is too coarse to represent the requested object."""


class ConfigError(ValueError):
    """A configuration file or parameter set is invalid."""


class InvariantError(RuntimeError):
    """Base class for violations of a mathematical invariant at runtime.

    The command line maps these to exit code 2.
    """


class SolverInstabilityError(InvariantError):
    """A density frame dipped below the negativity tolerance.

    Usually cured by a smaller time step or a finer grid.
    """


class PicardNonConvergenceError(InvariantError):
    """Fixed-point iteration exhausted its budget.

    Carries the residual history in ``residuals``.
    """

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = list(residuals)


class NotDeconvolvableError(InvariantError):
    """The initial density has vanishing Fourier modes, so the interaction
    potential cannot be identified from the dynamics."""
