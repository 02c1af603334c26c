"""Generalized Hermitian eigensolver and eigenfunction evaluation.

Small systems are reduced to a standard dense Hermitian problem through a
Cholesky factorization of the mass matrix; large ones use ARPACK in
shift-invert mode with a shift below the expected bottom of the spectrum.
Eigenfunctions are sampled on uniform grids by evaluating bulk hats on the
triangulation and the polynomial model on the rim elements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem, bulk_continuation
from .boundary_basis import BoundaryBasis
from .errors import ConfigurationError, SolverError
from .mesh import Mesh

__all__ = [
    "SpectralSolution",
    "solve_generalized",
    "evaluate_eigenfunction",
    "evaluate_field",
    "l2_error",
]

RESIDUAL_TOL = 1e-7
ORTHO_TOL = 1e-8
DEGENERACY_TOL = 1e-6
DENSE_THRESHOLD = 6000


@dataclass(frozen=True)
class SpectralSolution:
    """Sorted eigenpairs of (M - F) u = lambda B u with diagnostics."""

    eigenvalues: np.ndarray  # (k,) ascending
    eigenvectors: np.ndarray  # (N, k), B-orthonormal
    residuals: np.ndarray  # (k,) relative eigenresiduals
    degenerate: np.ndarray  # (k,) bool, member of a near-degenerate cluster
    metadata: dict

    @property
    def k(self) -> int:
        return len(self.eigenvalues)


def solve_generalized(
    system: AssembledSystem,
    k: int,
    dense_threshold: int = DENSE_THRESHOLD,
    sigma: float | None = None,
) -> SpectralSolution:
    """k smallest eigenpairs of the assembled system.

    Uses a dense reduction for sizes up to ``dense_threshold`` and ARPACK
    shift-invert above it.  The shift defaults to the system's hint, a
    coarse lower bound derived from the boundary operator norm.
    """
    n = system.size
    if not 1 <= k <= n:
        raise ConfigurationError(f"eigenvalue count k = {k} outside 1..{n}")

    a = system.a_matrix()
    b = system.b
    if n <= dense_threshold:
        vals, vecs = _solve_dense(a, b, k)
        solver = "dense"
        sigma_used = None
    else:
        sigma_used = system.sigma_hint if sigma is None else sigma
        vals, vecs = _solve_shift_invert(a, b, k, sigma_used)
        solver = "shift-invert"

    order = np.argsort(vals)
    vals = np.asarray(vals, dtype=float)[order]
    vecs = vecs[:, order]
    vecs = _b_orthonormalize(vecs, b)
    vecs = _fix_phases(vecs)

    residuals = _relative_residuals(a, b, vals, vecs)
    worst = residuals / (np.abs(vals) + 1.0)
    if worst.max() > RESIDUAL_TOL:
        raise SolverError(
            f"eigenpair residual {residuals[worst.argmax()]:.3e} exceeds contract "
            f"for eigenvalue {vals[worst.argmax()]:.6g}"
        )

    metadata = {
        "n": system.mesh_n,
        "N": n,
        "r": system.rank_r,
        "bc": system.label,
        "solver": solver,
        "sigma": sigma_used,
        "compatibility_residual": system.compatibility_residual,
        "bc_residual": system.bc_residual,
    }
    return SpectralSolution(
        eigenvalues=vals,
        eigenvectors=vecs,
        residuals=residuals,
        degenerate=_degeneracy_flags(vals),
        metadata=metadata,
    )


def _solve_dense(a: sp.spmatrix, b: sp.spmatrix, k: int):
    ad = a.toarray()
    bd = b.toarray()
    try:
        vals, vecs = scipy.linalg.eigh(ad, bd, subset_by_index=(0, k - 1))
    except scipy.linalg.LinAlgError as exc:
        raise SolverError(f"mass matrix not positive definite: {exc}") from exc
    return vals, vecs


def _solve_shift_invert(a: sp.spmatrix, b: sp.spmatrix, k: int, sigma: float):
    # deterministic start vector: ARPACK's default is random
    n = a.shape[0]
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        vals, vecs = spla.eigsh(
            a.tocsc(), k=k, M=b.tocsc(), sigma=sigma, which="LM", v0=v0
        )
    except spla.ArpackNoConvergence as exc:
        raise SolverError(
            f"shift-invert iteration did not converge at sigma = {sigma:.6g}: "
            f"{len(exc.eigenvalues)} of {k} pairs converged"
        ) from exc
    except (RuntimeError, ValueError) as exc:
        raise SolverError(f"shift-invert factorization failed: {exc}") from exc
    return vals, vecs


def _b_orthonormalize(vecs: np.ndarray, b: sp.spmatrix) -> np.ndarray:
    gram = vecs.conj().T @ (b @ vecs)
    gram = 0.5 * (gram + gram.conj().T)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"returned eigenvectors are B-degenerate: {exc}") from exc
    return scipy.linalg.solve_triangular(
        chol, vecs.conj().T, lower=True
    ).conj().T


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = int(np.abs(col).argmax())
        pivot = col[idx]
        if np.abs(pivot) > 0:
            out[:, j] = col * (np.abs(pivot) / pivot)
    return out


def _relative_residuals(a, b, vals, vecs):
    av = a @ vecs
    bv = b @ vecs
    res = av - bv * vals[None, :]
    return np.linalg.norm(res, axis=0) / np.linalg.norm(vecs, axis=0)


def _degeneracy_flags(vals: np.ndarray) -> np.ndarray:
    k = len(vals)
    flags = np.zeros(k, dtype=bool)
    for i in range(k - 1):
        tol = DEGENERACY_TOL * (1.0 + abs(vals[i]))
        if vals[i + 1] - vals[i] <= tol:
            flags[i] = True
            flags[i + 1] = True
    return flags


def evaluate_field(mesh: Mesh, basis: BoundaryBasis, coefficients, points) -> np.ndarray:
    """Evaluate sum_i u_i phi_i at arbitrary points of [0,1]^2.

    Points in the closed bulk region [h,1-h]^2 use the piecewise-linear
    representation (bulk hats plus the interface continuation of d-carrying
    boundary functions); remaining points use the rim polynomials of the
    element containing them.
    """
    u = np.asarray(coefficients)
    if u.shape != (mesh.N_B + basis.size,):
        raise ConfigurationError(
            f"coefficient vector has shape {u.shape}, expected ({mesh.N_B + basis.size},)"
        )
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    u_bulk = u[: mesh.N_B]
    u_bdry = u[mesh.N_B :]
    w_eff = u_bulk + bulk_continuation(mesh, basis) @ u_bdry

    out = np.zeros(len(pts), dtype=complex)
    h = mesh.h
    tol = 1e-12
    in_bulk = (
        (pts[:, 0] >= h - tol)
        & (pts[:, 0] <= 1 - h + tol)
        & (pts[:, 1] >= h - tol)
        & (pts[:, 1] <= 1 - h + tol)
    )
    if in_bulk.any():
        out[in_bulk] = _eval_bulk(mesh, w_eff, pts[in_bulk])

    rim_idx = np.nonzero(~in_bulk)[0]
    if rim_idx.size:
        out[rim_idx] = _eval_rim(mesh, basis, u_bulk, u_bdry, pts[rim_idx])
    return out


def _eval_bulk(mesh: Mesh, w: np.ndarray, pts: np.ndarray) -> np.ndarray:
    m = mesh.n - 2
    h = mesh.h
    sq = np.clip(np.floor((pts - h) / h).astype(int), 0, m - 2)
    u = (pts[:, 0] - h) / h - sq[:, 0]
    v = (pts[:, 1] - h) / h - sq[:, 1]
    bl = sq[:, 1] * m + sq[:, 0]
    f_bl = w[bl]
    f_br = w[bl + 1]
    f_tl = w[bl + m]
    f_tr = w[bl + m + 1]
    rising = (sq[:, 0] + sq[:, 1]) % 2 == 0  # diagonal bottom-left to top-right
    lower = np.where(rising, v <= u, u + v <= 1.0)
    val_rise = np.where(
        lower,
        f_bl + (f_br - f_bl) * u + (f_tr - f_br) * v,
        f_bl + (f_tr - f_tl) * u + (f_tl - f_bl) * v,
    )
    val_fall = np.where(
        lower,
        f_bl + (f_br - f_bl) * u + (f_tl - f_bl) * v,
        f_tr + (f_tr - f_tl) * (u - 1.0) + (f_tr - f_br) * (v - 1.0),
    )
    return np.where(rising, val_rise, val_fall)


def _eval_rim(
    mesh: Mesh,
    basis: BoundaryBasis,
    u_bulk: np.ndarray,
    u_bdry: np.ndarray,
    pts: np.ndarray,
) -> np.ndarray:
    from .assembly import _monomials, ring_presence
    from .boundary_basis import V_MATRIX

    coeffs = basis.element_coefficients()  # (N_S, 8, T)
    presence = ring_presence(mesh)
    out = np.zeros(len(pts), dtype=complex)
    assigned = np.zeros(len(pts), dtype=bool)
    for k, el in enumerate(mesh.rim_elements):
        if assigned.all():
            break
        eta, xi = el.to_reference(pts)
        mask = ~assigned & el.contains_reference(eta, xi)
        if not mask.any():
            continue
        p_u = coeffs[k] @ u_bdry  # (8,)
        for slot, node in presence[k]:
            p_u = p_u + V_MATRIX[:, slot] * u_bulk[node]
        mu = _monomials(eta[mask], xi[mask])  # (8, npts)
        out[mask] = mu.T @ p_u
        assigned[mask] = True
    if not assigned.all():
        bad = pts[~assigned][0]
        raise SolverError(f"point ({bad[0]}, {bad[1]}) not located in any element")
    return out


def evaluate_eigenfunction(
    solution: SpectralSolution,
    mesh: Mesh,
    basis: BoundaryBasis,
    index: int,
    grid: int = 101,
) -> np.ndarray:
    """Sample eigenfunction ``index`` on a uniform grid over [0,1]^2.

    Returns a (grid, grid) complex array with entry [j, i] the value at
    (x_i, y_j), x_i = i/(grid-1).
    """
    if not 0 <= index < solution.k:
        raise ConfigurationError(f"eigenfunction index {index} outside 0..{solution.k - 1}")
    xs = np.linspace(0.0, 1.0, grid)
    gx, gy = np.meshgrid(xs, xs)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals = evaluate_field(mesh, basis, solution.eigenvectors[:, index], pts)
    return vals.reshape(grid, grid)


def l2_error(field_a, field_b) -> float:
    """Discrete L2 distance after unit normalization and phase alignment."""
    fa = np.asarray(field_a, dtype=complex).ravel()
    fb = np.asarray(field_b, dtype=complex).ravel()
    if fa.shape != fb.shape:
        raise ConfigurationError(f"field shapes differ: {fa.shape} vs {fb.shape}")
    na = np.linalg.norm(fa)
    nb = np.linalg.norm(fb)
    if na == 0.0 or nb == 0.0:
        raise ConfigurationError("cannot compare a zero field")
    fa = fa / na
    fb = fb / nb
    overlap = np.vdot(fb, fa)
    if np.abs(overlap) > 0:
        fa = fa * (np.abs(overlap) / overlap)
    return float(np.linalg.norm(fa - fb))
