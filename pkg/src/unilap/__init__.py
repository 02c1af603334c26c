"""Finite-element spectra of the 2-D Laplacian on the unit square under
self-adjoint boundary conditions encoded by a boundary unitary."""

from .assembly import AssembledSystem, assemble, assemble_natural
from .boundary_basis import BoundaryBasis, build_boundary_basis
from .boundary_conditions import (
    BoundaryUnitary,
    GapReport,
    dirichlet,
    load_unitary,
    neumann,
    partial_cayley,
    periodic,
    piecewise_robin,
    quasiperiodic,
    robin,
    save_unitary,
    spectral_gap_check,
)
from .eigensolver import (
    SpectralSolution,
    evaluate_eigenfunction,
    l2_error,
    solve_generalized,
)
from .errors import (
    ConfigurationError,
    GeometryError,
    IncompatibleSystemError,
    SolverError,
    UnilapError,
    ValidationError,
)
from .mesh import Mesh, RimElement, Triangle, build_mesh, reference_triangle_map

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "BoundaryBasis",
    "BoundaryUnitary",
    "ConfigurationError",
    "GapReport",
    "GeometryError",
    "IncompatibleSystemError",
    "Mesh",
    "RimElement",
    "SolverError",
    "SpectralSolution",
    "Triangle",
    "UnilapError",
    "ValidationError",
    "assemble",
    "assemble_natural",
    "build_boundary_basis",
    "build_mesh",
    "dirichlet",
    "evaluate_eigenfunction",
    "l2_error",
    "load_unitary",
    "neumann",
    "partial_cayley",
    "periodic",
    "piecewise_robin",
    "quasiperiodic",
    "reference_triangle_map",
    "robin",
    "save_unitary",
    "solve_generalized",
    "spectral_gap_check",
]
