"""Boundary base-functions built from a boundary unitary.

Each boundary element carries the polynomial model

    phi(eta, xi) = p1*xi^3*eta + p2*xi^3 + p3*xi^2*eta + p4*xi^2
                 + p5*xi*eta + p6*xi + p7*eta + p8

with eta tangential and xi normal (xi = 0 on the outer boundary).  The
eight coefficients interpolate four node rows per element column: trace
values a at xi = 0, then b, c at xi = 1/3, 2/3, and interface values d at
xi = 1.  The trace and the normal-derivative trace are both linear in eta,
which lets the boundary condition act on per-interval Legendre
coefficients of order 0 and 1.

Two families of functions are produced: 2*N_S functions with vanishing
trace and normal derivative (one per canonical choice of the interior node
rows c, d), and r functions solving the rank-deficient boundary linear
system by SVD, closed with the least-squares solution nearest the Neumann
reference family.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .boundary_conditions import BoundaryUnitary, boundary_strength
from .errors import ConfigurationError, IncompatibleSystemError, ValidationError

__all__ = [
    "V_MATRIX",
    "BoundaryBasis",
    "normal_derivative",
    "legendre_coefficients",
    "node_values_to_polynomials",
    "assemble_boundary_system",
    "solve_boundary_system",
    "trivial_family",
    "x_neumann",
    "build_boundary_basis",
    "verify_boundary_condition",
]

# Maps the node values [a_k, a_{k+1}, b_{k+1}, c_{k+1}, d_{k+1}, d_k, c_k, b_k]
# of one element to its polynomial coefficients p1..p8.
V_MATRIX = 0.5 * np.array(
    [
        [9, -9, 27, -27, 9, -9, 27, -27],
        [-9, 0, 0, 0, 0, 9, -27, 27],
        [-18, 18, -45, 36, -9, 9, -36, 45],
        [18, 0, 0, 0, 0, -9, 36, -45],
        [11, -11, 18, -9, 2, -2, 9, -18],
        [-11, 0, 0, 0, 0, 2, -9, 18],
        [-2, 2, 0, 0, 0, 0, 0, 0],
        [2, 0, 0, 0, 0, 0, 0, 0],
    ],
    dtype=float,
)


def normal_derivative(a, b, c, d, h):
    """Normal derivative at a boundary node of the cubic through its column.

    The cubic interpolates (a, b, c, d) at xi = 0, 1/3, 2/3, 1 on an element
    of side h; the returned value is its xi-derivative at the boundary node.
    """
    if h <= 0:
        raise ConfigurationError(f"h must be positive, got {h}")
    return (-5.5 * a + 9.0 * b - 4.5 * c + d) / h


def legendre_coefficients(a_j, a_j1, n_j, n_j1, h):
    """Order-0/1 Legendre coefficients of the linear trace and derivative.

    Returns (xi_j, xi_{j+N_S}, zeta_j, zeta_{j+N_S}) for one interval with
    endpoint trace values (a_j, a_{j+1}) and normal-derivative values
    (n_j, n_{j+1}).
    """
    if h <= 0:
        raise ConfigurationError(f"h must be positive, got {h}")
    rh = np.sqrt(h)
    return (
        rh * (a_j1 + a_j) / 2.0,
        rh * (a_j1 - a_j) / (2.0 * np.sqrt(3.0)),
        rh * (n_j1 + n_j) / 2.0,
        rh * (n_j1 - n_j) / (2.0 * np.sqrt(3.0)),
    )


def node_values_to_polynomials(a_k, a_k1, b_k, b_k1, c_k, c_k1, d_k, d_k1):
    """Polynomial coefficients p1..p8 of one element from its node values."""
    stacked = np.stack(
        [
            np.asarray(a_k),
            np.asarray(a_k1),
            np.asarray(b_k1),
            np.asarray(c_k1),
            np.asarray(d_k1),
            np.asarray(d_k),
            np.asarray(c_k),
            np.asarray(b_k),
        ]
    )
    return V_MATRIX @ stacked


def cyclic_shift(n_s: int) -> np.ndarray:
    """N_S x N_S matrix sending a vector (v_j) to (v_{j+1}) cyclically."""
    m = np.eye(n_s, k=1)
    m[-1, 0] = 1.0
    return m


def _legendre_maps(h: float, n_s: int):
    """Linear maps from node-value vectors to Legendre coefficients.

    Returns (xi_s, zeta_s, zeta_w): xi/zeta coefficient vectors are
    xi = xi_s @ s and zeta = zeta_s @ s + zeta_w @ w for s = [a; b],
    w = [c; d].
    """
    shift = cyclic_shift(n_s)
    eye = np.eye(n_s)
    k0 = (np.sqrt(h) / 2.0) * (shift + eye)
    k1 = (np.sqrt(h) / (2.0 * np.sqrt(3.0))) * (shift - eye)
    k = np.vstack([k0, k1])  # node values -> Legendre coefficients
    left = np.hstack([eye, np.zeros((n_s, n_s))])
    right = np.hstack([np.zeros((n_s, n_s)), eye])
    n_from_s = (-5.5 * left + 9.0 * right) / h
    n_from_w = (-4.5 * left + right) / h
    xi_s = k @ left
    zeta_s = k @ n_from_s
    zeta_w = k @ n_from_w
    return xi_s, zeta_s, zeta_w


def assemble_boundary_system(u: BoundaryUnitary, h: float, n_s: int):
    """Coefficient and independent matrices (F, C) of the boundary system.

    The system F s = C w expresses the boundary condition
    (xi - i*zeta) = U (xi + i*zeta) on the node values, with the canonical
    basis of R^{2N_S} as the set of w columns.
    """
    if u.n_s != n_s:
        raise ConfigurationError(
            f"unitary dimension {u.dim} does not match 2*N_S = {2 * n_s}"
        )
    xi_s, zeta_s, zeta_w = _legendre_maps(h, n_s)
    um = u.matrix
    f = (xi_s - 1j * zeta_s) - um @ (xi_s + 1j * zeta_s)
    c = 1j * (zeta_w + um @ zeta_w)
    return f, c


def x_neumann(n_s: int) -> np.ndarray:
    """Reference node values with unit trace and zero normal derivative.

    Column j <= N_S (c_j = 1): a = e_j, b = (10/9) e_j; column j > N_S
    (d_j = 1): a = e_j, b = (1/2) e_j.
    """
    eye = np.eye(n_s)
    x_c = np.vstack([eye, (10.0 / 9.0) * eye])
    x_d = np.vstack([eye, 0.5 * eye])
    return np.hstack([x_c, x_d])


class BoundarySolve(NamedTuple):
    solution: np.ndarray  # (2*N_S, r) node values s = [a; b]
    rank: int
    compatibility_residual: float
    singular_values: np.ndarray


def solve_boundary_system(f: np.ndarray, c: np.ndarray, h: float, n_s: int) -> BoundarySolve:
    """Solve F s = C by SVD with the least-squares closure toward Neumann.

    The rank tolerance is 2*N_S times the spacing of the largest singular
    value; the compatibility residual ||W_null^H C||_2 must stay below it.
    Only the first r columns of C enter; the null-space freedom is fixed by
    minimizing the distance to the Neumann reference columns.
    """
    dim = 2 * n_s
    if f.shape != (dim, dim) or c.shape != (dim, dim):
        raise ConfigurationError(
            f"boundary system must be {dim}x{dim}, got {f.shape} and {c.shape}"
        )
    w, sv, vh = np.linalg.svd(f)
    tol = dim * np.spacing(sv[0]) if sv.size else 0.0
    r = int((sv > tol).sum())
    w_null = w[:, r:]
    compat = float(np.linalg.norm(w_null.conj().T @ c, 2)) if r < dim else 0.0
    if compat > tol:
        raise IncompatibleSystemError(compat, tol)
    x = (w[:, :r].conj().T @ c[:, :r]) / sv[:r, None]
    v_red = vh[:r].conj().T
    v_null = vh[r:].conj().T
    s = v_red @ x + v_null @ (v_null.conj().T @ x_neumann(n_s)[:, :r])
    return BoundarySolve(s, r, compat, sv)


def trivial_family(n_s: int):
    """Node values of the 2*N_S functions with zero trace and derivative.

    Returns (a, b, c, d), each of shape (N_S, 2*N_S).  Column j sets
    c = e_j with b = e_j/2; column N_S + j sets d = e_j with b = -e_j/9.
    """
    eye = np.eye(n_s)
    zero = np.zeros((n_s, n_s))
    a = np.zeros((n_s, 2 * n_s))
    b = np.hstack([0.5 * eye, -(1.0 / 9.0) * eye])
    c = np.hstack([eye, zero])
    d = np.hstack([zero, eye])
    return a, b, c, d


@dataclass(frozen=True)
class BoundaryBasis:
    """Node values of every boundary base-function, column per function.

    Columns 0..2*N_S-1 are the trivial family, the remaining ones the kept
    solutions of the boundary system.  Arrays a, b, c, d have shape
    (N_S, 2*N_S + n_family2).  ``rank_r`` is the SVD rank of the boundary
    system; ``kept_columns`` lists which of its r solution columns survive
    the independence filter against the trivial family and the
    interface-ring hats (for essential conditions some are exact
    duplicates of that span).
    """

    n_s: int
    h: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    rank_r: int
    kept_columns: np.ndarray
    compatibility_residual: float
    bc_residual: float
    label: str
    strength: float  # operator norm of the partial Cayley transform

    @property
    def size(self) -> int:
        return self.a.shape[1]

    @property
    def n_family1(self) -> int:
        return 2 * self.n_s

    @property
    def family2_slice(self) -> slice:
        return slice(2 * self.n_s, self.size)

    @property
    def is_real(self) -> bool:
        return max(
            float(np.abs(m.imag).max()) for m in (self.a, self.b, self.c, self.d)
        ) < 1e-13

    def normal_derivatives(self) -> np.ndarray:
        """Nodal normal-derivative values, shape (N_S, size)."""
        return normal_derivative(self.a, self.b, self.c, self.d, self.h)

    def element_node_values(self) -> np.ndarray:
        """Per-element node values in the V column order, (N_S, 8, size)."""
        idx = np.arange(self.n_s)
        nxt = (idx + 1) % self.n_s
        return np.stack(
            [
                self.a[idx],
                self.a[nxt],
                self.b[nxt],
                self.c[nxt],
                self.d[nxt],
                self.d[idx],
                self.c[idx],
                self.b[idx],
            ],
            axis=1,
        )

    def element_coefficients(self) -> np.ndarray:
        """Polynomial coefficients per element, shape (N_S, 8, size)."""
        return np.matmul(V_MATRIX, self.element_node_values())

    def dump_csv(self, path) -> None:
        """Write node values and per-element polynomial coefficients (debug)."""
        coeffs = self.element_coefficients()
        nodes = self.element_node_values()
        node_names = ["a_k", "a_k1", "b_k1", "c_k1", "d_k1", "d_k", "c_k", "b_k"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["function", "family", "square"]
            for name in node_names:
                header += [f"{name}_re", f"{name}_im"]
            for i in range(8):
                header += [f"p{i + 1}_re", f"p{i + 1}_im"]
            writer.writerow(header)
            for t in range(self.size):
                family = 1 if t < self.n_family1 else 2
                for k in range(self.n_s):
                    row = [t + 1, family, k + 1]
                    for v in nodes[k, :, t]:
                        row += [repr(float(v.real)), repr(float(v.imag))]
                    for v in coeffs[k, :, t]:
                        row += [repr(float(v.real)), repr(float(v.imag))]
                    writer.writerow(row)


def _ring_coordinate_ids(n_s: int) -> np.ndarray:
    """Identifier of the interface lattice node behind each d-slot.

    Boundary node j carries its d-value at the lattice node one step inward;
    nodes at domain corners (j multiple of q = N_S/4) have none (-1), and
    the two nodes adjacent to a corner share the diagonal lattice node.
    """
    q = n_s // 4
    ids = np.full(n_s, -1, dtype=int)
    next_id = 0
    for j in range(n_s):
        if j % q == 0 or ids[j] >= 0:
            continue
        ids[j] = next_id
        if j % q == q - 1:
            ids[(j + 2) % n_s] = next_id  # shares the corner-diagonal node
        next_id += 1
    used = sorted({int(i) for i in ids if i >= 0})
    remap = {old: new for new, old in enumerate(used)}
    return np.array([remap[int(i)] if i >= 0 else -1 for i in ids], dtype=int)


def _select_independent_columns(n_s: int, a, b, c, d, tol: float = 1e-8) -> np.ndarray:
    """Indices of system-solution columns independent of the rest of the basis.

    Works in exact nodal coordinates [a; b; c; d; ring values], where the
    interface-ring bulk hats act as d-slot values tied to their lattice
    node.  For essential-type conditions some solution columns lie exactly
    in the span of the trivial family plus ring hats and must be dropped to
    keep the mass matrix positive definite.
    """
    rid = _ring_coordinate_ids(n_s)
    n_ring = int(rid.max()) + 1
    dim = 4 * n_s + n_ring

    def vec(av, bv, cv, dv):
        # d-values at non-corner slots drag in the bulk hat of their
        # interface node (the assembled function's bulk continuation)
        v = np.zeros(dim, dtype=complex)
        v[:n_s] = av
        v[n_s : 2 * n_s] = bv
        v[2 * n_s : 3 * n_s] = cv
        v[3 * n_s : 4 * n_s] = dv
        for j in np.nonzero(np.abs(np.asarray(dv)) > 0)[0]:
            if rid[j] >= 0:
                v[4 * n_s + rid[j]] += dv[j]
        return v

    cols = []
    for ring in range(n_ring):
        v = np.zeros(dim, dtype=complex)
        members = np.nonzero(rid == ring)[0]
        if len(members) == 1:
            v[3 * n_s + members] = 1.0  # d-slot of the conforming ring hat
        # nodes shared by two sides (bulk-corner diagonals) keep a bulk-only hat
        v[4 * n_s + ring] = 1.0
        cols.append(v)
    a1, b1, c1, d1 = trivial_family(n_s)
    for t in range(2 * n_s):
        cols.append(vec(a1[:, t], b1[:, t], c1[:, t], d1[:, t]))
    prefix = np.column_stack(cols)

    q_mat, r_mat = np.linalg.qr(prefix)
    if np.abs(np.diag(r_mat)).min() < 1e-10:
        raise ValidationError("trivial family and ring hats are not independent")

    n_fam2 = a.shape[1]
    fam2 = np.column_stack(
        [vec(a[:, m], b[:, m], c[:, m], d[:, m]) for m in range(n_fam2)]
    ) if n_fam2 else np.zeros((dim, 0), dtype=complex)

    norms = np.linalg.norm(fam2, axis=0)
    resid = fam2 - q_mat @ (q_mat.conj().T @ fam2)
    kept: list[int] = []
    q_extra = np.zeros((dim, 0), dtype=complex)
    for m in range(n_fam2):
        col = resid[:, m]
        if q_extra.shape[1]:
            col = col - q_extra @ (q_extra.conj().T @ col)
            col = col - q_extra @ (q_extra.conj().T @ col)
        nrm = np.linalg.norm(col)
        if nrm > tol * max(norms[m], 1.0):
            kept.append(m)
            q_extra = np.hstack([q_extra, (col / nrm)[:, None]])
    return np.array(kept, dtype=int)


def build_boundary_basis(u: BoundaryUnitary, h: float) -> BoundaryBasis:
    """Construct both boundary families for the given unitary and spacing."""
    n_s = u.n_s
    if n_s % 4 != 0:
        raise ConfigurationError(f"N_S must be a multiple of 4, got {n_s}")
    f, c = assemble_boundary_system(u, h, n_s)
    sol = solve_boundary_system(f, c, h, n_s)
    r = sol.rank

    w_cols = np.eye(2 * n_s, dtype=complex)[:, :r]
    kept = _select_independent_columns(
        n_s, sol.solution[:n_s], sol.solution[n_s:], w_cols[:n_s], w_cols[n_s:]
    )

    a1, b1, c1, d1 = trivial_family(n_s)
    a = np.hstack([a1.astype(complex), sol.solution[:n_s, kept]])
    b = np.hstack([b1.astype(complex), sol.solution[n_s:, kept]])
    c_mat = np.hstack([c1.astype(complex), w_cols[:n_s, kept]])
    d_mat = np.hstack([d1.astype(complex), w_cols[n_s:, kept]])

    basis = BoundaryBasis(
        n_s=n_s,
        h=h,
        a=a,
        b=b,
        c=c_mat,
        d=d_mat,
        rank_r=r,
        kept_columns=kept,
        compatibility_residual=sol.compatibility_residual,
        bc_residual=0.0,
        label=u.label,
        strength=boundary_strength(u),
    )
    resid = verify_boundary_condition(basis, u, h)
    object.__setattr__(basis, "bc_residual", resid)
    return basis


def verify_boundary_condition(basis: BoundaryBasis, u: BoundaryUnitary, h: float) -> float:
    """Largest entry of (xi - i zeta) - U (xi + i zeta) over all functions."""
    xi_s, zeta_s, zeta_w = _legendre_maps(h, basis.n_s)
    s = np.vstack([basis.a, basis.b])
    w = np.vstack([basis.c, basis.d])
    xi = xi_s @ s
    zeta = zeta_s @ s + zeta_w @ w
    resid = (xi - 1j * zeta) - u.matrix @ (xi + 1j * zeta)
    return float(np.abs(resid).max())
