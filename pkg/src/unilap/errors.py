"""Exception types shared across the package."""


class UnilapError(Exception):
    """Base class for all package errors."""


class ConfigurationError(UnilapError):
    """Invalid user-facing configuration (grid size, angles, dimensions)."""


class GeometryError(UnilapError):
    """Degenerate or inconsistent geometry."""


class ValidationError(UnilapError):
    """A matrix or file failed a mathematical validity check."""


class IncompatibleSystemError(UnilapError):
    """The boundary linear system is not compatible within tolerance."""

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"System is not compatible: residual {residual:.3e} exceeds tolerance {tol:.3e}"
        )


class SolverError(UnilapError):
    """The eigenvalue solver failed to produce a valid solution."""
