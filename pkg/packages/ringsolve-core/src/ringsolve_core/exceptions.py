"""Exception hierarchy for ringsolve."""


class RingSolveError(Exception):
    """Base class for all ringsolve errors."""


class SingularMatrixError(RingSolveError):
    """A pivot fell below the singularity threshold.

    For conduction networks with positive conductivities this signals an
    assembly bug, not a property of the physics.
    """

    def __init__(self, message: str, pivot_ratio: float | None = None):
        super().__init__(message)
        self.pivot_ratio = pivot_ratio


class ShapeMismatchError(RingSolveError, ValueError):
    """Operands have non-conformable shapes."""


class ParameterError(RingSolveError, ValueError):
    """A size, tolerance or network value is outside its valid range."""


class SizeGuardError(RingSolveError):
    """Refused to materialize a matrix above the configured size cap."""


class NoConvergenceError(RingSolveError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ModeError(RingSolveError):
    """Operation not available for the sweep mode in use."""


class NetworkFileError(RingSolveError):
    """A network file could not be read or failed validation."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
