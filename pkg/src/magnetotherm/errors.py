"""Exception types raised across the package."""


class MagnetothermError(Exception):
    """Base class for all package errors."""


class GridError(MagnetothermError, ValueError):
    pass


class ConfigError(MagnetothermError, ValueError):
    pass


class GhostError(MagnetothermError, ValueError):
    """A stencil was applied without a valid boundary (ghost) policy."""


class CoefficientError(MagnetothermError, ValueError):
    """A material coefficient violated its positivity floor."""


class ConstraintError(MagnetothermError, ValueError):
    """The unit-length constraint on the magnetization is violated."""


class PositivityLoss(MagnetothermError):
    """Temperature became non-positive during a step.

    Carries the step index and the first offending cell so the caller can
    report where the scheme failed.
    """

    def __init__(self, message, step=None, cell=None, value=None):
        super().__init__(message)
        self.step = step
        self.cell = cell
        self.value = value


class NonFiniteState(MagnetothermError):
    pass


class SolverError(MagnetothermError):
    """Iterative solver failed to reach tolerance."""

    def __init__(self, message, residual=None, iterations=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.history = history or []


class CheckpointError(MagnetothermError):
    pass
