"""Unitary matrices encoding self-adjoint boundary conditions.

A boundary condition is a 2N_S x 2N_S complex unitary acting on the vector
of order-0 and order-1 Legendre coefficients of the boundary trace and its
normal derivative over the N_S boundary intervals.  Order-0 coefficients
occupy the first N_S slots, order-1 the second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, ValidationError

__all__ = [
    "BoundaryUnitary",
    "GapReport",
    "dirichlet",
    "neumann",
    "robin",
    "periodic",
    "quasiperiodic",
    "piecewise_robin",
    "piecewise_robin_halves",
    "halves_lambda_nodes",
    "load_unitary",
    "save_unitary",
    "spectral_gap_check",
    "partial_cayley",
]

BUILD_TOL = 1e-12  # unitarity tolerance for exact constructions
LOAD_TOL = 1e-8  # unitarity tolerance for user-supplied files


@dataclass(frozen=True)
class BoundaryUnitary:
    """A validated boundary unitary with provenance label."""

    matrix: np.ndarray
    label: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"boundary unitary must be square, got {m.shape}")
        if m.shape[0] % 2 != 0:
            raise ValidationError(f"boundary unitary dimension must be even, got {m.shape[0]}")
        object.__setattr__(self, "matrix", m)
        tol = BUILD_TOL if self.label != "file" else LOAD_TOL
        dev = unitarity_deviation(m)
        if dev > tol:
            raise ValidationError(
                f"matrix is not unitary: max deviation of U^H U from identity is {dev:.3e}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_s(self) -> int:
        return self.matrix.shape[0] // 2

    def blocks(self):
        """The four N_S x N_S blocks (U00, U01, U10, U11)."""
        ns = self.n_s
        m = self.matrix
        return m[:ns, :ns], m[:ns, ns:], m[ns:, :ns], m[ns:, ns:]


@dataclass(frozen=True)
class GapReport:
    """Spectral diagnostics of a boundary unitary near the eigenvalue -1."""

    eigenvalues: np.ndarray
    distance_to_minus_one: np.ndarray
    gap: float
    dim_relevant_subspace: int
    tol: float

    @property
    def has_usable_gap(self) -> bool:
        return self.gap >= self.tol


def unitarity_deviation(matrix: np.ndarray) -> float:
    m = np.asarray(matrix, dtype=complex)
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())


def _check_n_s(n_s: int) -> int:
    if n_s < 8:
        raise ConfigurationError(f"N_S must be at least 8, got {n_s}")
    return n_s


def dirichlet(n_s: int) -> BoundaryUnitary:
    """U = -I: vanishing boundary trace."""
    _check_n_s(n_s)
    return BoundaryUnitary(-np.eye(2 * n_s, dtype=complex), "dirichlet")


def neumann(n_s: int) -> BoundaryUnitary:
    """U = +I: vanishing normal derivative."""
    _check_n_s(n_s)
    return BoundaryUnitary(np.eye(2 * n_s, dtype=complex), "neumann")


def robin(alpha: float, n_s: int) -> BoundaryUnitary:
    """U = exp(i*alpha) I, equivalent to normal derivative = -tan(alpha/2) * trace.

    alpha must lie strictly inside (-pi, pi); |alpha| = pi is the Dirichlet
    condition and is rejected here.
    """
    _check_n_s(n_s)
    if not -math.pi < alpha < math.pi:
        raise ConfigurationError(
            f"robin angle must be in (-pi, pi), got {alpha!r}; alpha = +/-pi is Dirichlet"
        )
    u = np.exp(1j * alpha) * np.eye(2 * n_s, dtype=complex)
    return BoundaryUnitary(u, f"robin({alpha})")


def _side_pairing(q: int, phase_13: complex, phase_31: complex) -> np.ndarray:
    """Order-0 block pairing opposite sides through a per-side reversal.

    Side blocks are q x q; the reversal is the antidiagonal identity.  Sides
    are numbered 0..3 counterclockwise (bottom, right, top, left); 0 pairs
    with 2 and 1 pairs with 3.
    """
    p = np.eye(q, dtype=complex)[::-1]
    u0 = np.zeros((4 * q, 4 * q), dtype=complex)

    def put(row_side, col_side, phase):
        u0[row_side * q : (row_side + 1) * q, col_side * q : (col_side + 1) * q] = phase * p

    put(0, 2, phase_13)
    put(2, 0, phase_31)
    put(1, 3, 1.0)
    put(3, 1, 1.0)
    return u0


def _assemble_periodic(n: int, phase_13: complex, phase_31: complex, label: str) -> BoundaryUnitary:
    if n < 2:
        raise ConfigurationError(f"n must be at least 2, got {n}")
    q = n - 1
    u0 = _side_pairing(q, phase_13, phase_31)
    u = np.zeros((8 * q, 8 * q), dtype=complex)
    u[: 4 * q, : 4 * q] = u0
    # odd-order Legendre polynomials change sign under the side reversal
    u[4 * q :, 4 * q :] = -u0
    return BoundaryUnitary(u, label)


def periodic(n: int) -> BoundaryUnitary:
    """Periodic identification of opposite sides of the square."""
    return _assemble_periodic(n, 1.0, 1.0, "periodic")


def quasiperiodic(n: int, alpha: float) -> BoundaryUnitary:
    """Bloch-periodic condition: trace(x, 0) = exp(i*alpha) * trace(x, 1).

    The bottom-to-top identification carries the phase exp(i*alpha); the
    left-right pair stays plainly periodic.
    """
    return _assemble_periodic(
        n, np.exp(1j * alpha), np.exp(-1j * alpha), f"quasiperiodic({alpha})"
    )


def piecewise_robin(alphas) -> BoundaryUnitary:
    """Diagonal unitary with a per-interval Robin angle.

    Entry j of ``alphas`` applies to both Legendre slots of interval j.
    Angles must lie in (-pi, pi].
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1:
        raise ConfigurationError("alphas must be a 1-D sequence")
    _check_n_s(len(alphas))
    if np.any(alphas <= -math.pi) or np.any(alphas > math.pi):
        raise ConfigurationError("piecewise robin angles must lie in (-pi, pi]")
    phases = np.exp(1j * alphas)
    u = np.diag(np.concatenate([phases, phases]))
    return BoundaryUnitary(u, "piecewise_robin")


def _lower_half_interval_mask(n: int) -> np.ndarray:
    """True for intervals whose midpoint lies on the lower half of the
    boundary, split at the midpoints of the right and left sides."""
    q = n - 1
    n_s = 4 * q
    h = 1.0 / q
    mid = (np.arange(n_s) + 0.5) * h  # arc length position, perimeter 4
    return (mid < 1.5) | (mid > 3.5)


def piecewise_robin_halves(n: int, lambda_lower: float, lambda_upper: float) -> BoundaryUnitary:
    """Two-material Robin condition with jumps at the side midpoints.

    The lower half of the boundary (through the bottom side, between the
    midpoints of the right and left sides) carries Robin parameter
    ``lambda_lower``, the upper half ``lambda_upper``.  n odd guarantees a
    boundary node exactly at each side midpoint.
    """
    if n % 2 == 0:
        raise ConfigurationError(f"n must be odd to place the jumps at side midpoints, got {n}")
    mask = _lower_half_interval_mask(n)
    alphas = np.where(mask, -2.0 * math.atan(lambda_lower), -2.0 * math.atan(lambda_upper))
    u = piecewise_robin(alphas)
    return BoundaryUnitary(u.matrix, f"piecewise_robin({lambda_lower},{lambda_upper})")


def halves_lambda_nodes(n: int, lambda_lower: float, lambda_upper: float) -> np.ndarray:
    """Per-boundary-node Robin values for the two-material configuration.

    Node j inherits the value of interval j (the interval starting at the
    node), so the linear interpolation jumps over a single interval with
    slope 2/h at each side midpoint.
    """
    mask = _lower_half_interval_mask(n)
    return np.where(mask, float(lambda_lower), float(lambda_upper))


def save_unitary(u: BoundaryUnitary | np.ndarray, path) -> None:
    """Write a unitary in the SAE-U v1 text format.

    First line ``SAE-U v1 dim=<2N_S>``, then one row per line of
    whitespace-separated ``re,im`` pairs with 17 significant digits.
    """
    m = u.matrix if isinstance(u, BoundaryUnitary) else np.asarray(u, dtype=complex)
    with open(path, "w") as f:
        f.write(f"SAE-U v1 dim={m.shape[0]}\n")
        for row in m:
            f.write(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
            f.write("\n")


def load_unitary(path) -> BoundaryUnitary:
    """Read and validate a unitary from the SAE-U v1 text format."""
    with open(path) as f:
        header = f.readline().strip()
        parts = header.split()
        if len(parts) != 3 or parts[0] != "SAE-U" or parts[1] != "v1" or not parts[2].startswith("dim="):
            raise ValidationError(f"{path}: bad header {header!r}, expected 'SAE-U v1 dim=<N>'")
        try:
            dim = int(parts[2][4:])
        except ValueError:
            raise ValidationError(f"{path}: bad dimension in header {header!r}") from None
        if dim <= 0 or dim % 2 != 0:
            raise ValidationError(f"{path}: dimension must be a positive even integer, got {dim}")
        rows = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            entries = line.split()
            if len(entries) != dim:
                raise ValidationError(
                    f"{path}: row {len(rows) + 1} has {len(entries)} entries, expected {dim}"
                )
            try:
                rows.append([complex(*map(float, e.split(","))) for e in entries])
            except (ValueError, TypeError):
                raise ValidationError(f"{path}: unparsable entry in row {len(rows) + 1}") from None
    if len(rows) != dim:
        raise ValidationError(f"{path}: found {len(rows)} rows, expected {dim}")
    return BoundaryUnitary(np.array(rows, dtype=complex), "file")


def spectral_gap_check(u: BoundaryUnitary, tol: float = 1e-8) -> GapReport:
    """Eigenvalues of U and their arc distance to -1.

    The relevant subspace collects eigenvalues within arc distance ``tol``
    of -1; the gap is the smallest arc distance among the remaining ones
    (infinite when every eigenvalue sits at -1, as for Dirichlet).
    """
    eigs = _unitary_eigenvalues(u.matrix)
    dist = np.abs(np.angle(-eigs))
    at_minus_one = dist <= tol
    rest = dist[~at_minus_one]
    gap = float(rest.min()) if rest.size else math.inf
    return GapReport(
        eigenvalues=eigs,
        distance_to_minus_one=dist,
        gap=gap,
        dim_relevant_subspace=int(at_minus_one.sum()),
        tol=tol,
    )


def partial_cayley(u: BoundaryUnitary, tol: float = 1e-8) -> np.ndarray:
    """Hermitian boundary operator i P_perp (U - I)(U + I)^{-1}.

    Acts as -tan(theta/2) on each eigenvector with eigenvalue exp(i*theta)
    away from -1 and as zero on the relevant subspace.  Refuses unitaries
    whose spectrum accumulates at -1 without reaching it.
    """
    t, z = scipy.linalg.schur(u.matrix, output="complex")
    eigs = np.diag(t)
    dist = np.abs(np.angle(-eigs))
    at_minus_one = dist <= tol
    rest = dist[~at_minus_one]
    if rest.size and rest.min() < tol:
        raise ValidationError(
            f"no usable spectral gap at -1: eigenvalue at arc distance {rest.min():.3e}"
        )
    vals = np.where(at_minus_one, 0.0, -np.tan(np.angle(eigs) / 2.0))
    a = (z * vals) @ z.conj().T
    return 0.5 * (a + a.conj().T)


def boundary_strength(u: BoundaryUnitary, tol: float = 1e-8) -> float:
    """Operator norm of the partial Cayley transform (0 for Dirichlet)."""
    eigs = _unitary_eigenvalues(u.matrix)
    dist = np.abs(np.angle(-eigs))
    away = dist > tol
    if not away.any():
        return 0.0
    return float(np.abs(np.tan(np.angle(eigs[away]) / 2.0)).max())


def _unitary_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    t = scipy.linalg.schur(np.asarray(matrix, dtype=complex), output="complex")[0]
    return np.diag(t).copy()
