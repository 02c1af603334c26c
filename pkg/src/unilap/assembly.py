"""Assembly of the stiffness, mass and boundary matrices M, B, F.

Bulk contributions come from closed-form integrals of linear functions on
triangles; rim contributions from Gauss quadrature of the 8-coefficient
polynomial model, exact for its degree.  Boundary functions whose interface
row d is nonzero continue into the bulk as standard hat functions on the
interface lattice nodes, which also produces the bulk-boundary cross terms.
The discrete problem is (M - F) u = lambda B u.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .boundary_basis import BoundaryBasis
from .errors import ConfigurationError, GeometryError, ValidationError
from .mesh import Mesh, RimElement, Triangle, reference_triangle_map

__all__ = [
    "AssembledSystem",
    "bulk_element_matrices",
    "rim_element_matrices",
    "assemble",
    "assemble_natural",
    "bulk_continuation",
]

HERMITICITY_TOL = 1e-10

# Monomial exponents (e_eta, e_xi) of the rim polynomial model, in the
# coefficient order p1..p8.
_MONOMIAL_POWERS = np.array(
    [(1, 3), (0, 3), (1, 2), (0, 2), (1, 1), (0, 1), (1, 0), (0, 0)], dtype=int
)

# Reference-coordinate coefficients (alpha, beta, gamma) of the three hat
# functions on the reference triangle, one row per local vertex.
_HAT_COEFFS = np.array([[1.0, -1.0, -1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def _gauss01(order: int):
    """Gauss-Legendre points and weights on [0, 1]."""
    pts, wts = np.polynomial.legendre.leggauss(order)
    return 0.5 * (pts + 1.0), 0.5 * wts


def _monomials(eta, xi):
    """Values of the eight monomials at points, shape (8, npts)."""
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return eta[None, :] ** _MONOMIAL_POWERS[:, :1] * xi[None, :] ** _MONOMIAL_POWERS[:, 1:]


def _monomial_gradients(eta, xi):
    """(d/d eta, d/d xi) of the monomials, two (8, npts) arrays."""
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    pe = _MONOMIAL_POWERS[:, :1].astype(float)
    px = _MONOMIAL_POWERS[:, 1:].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_eta = np.where(pe > 0, pe * eta[None, :] ** np.maximum(pe - 1, 0), 0.0) * xi[
            None, :
        ] ** px
        d_xi = eta[None, :] ** pe * np.where(
            px > 0, px * xi[None, :] ** np.maximum(px - 1, 0), 0.0
        )
    return d_eta, d_xi


def _rim_quadrature(kind: str | None, order_eta: int, order_xi: int):
    """Quadrature nodes and weights on the element's reference domain.

    Full squares use a tensor Gauss rule.  Corner halves are integrated via
    the collapsed substitution xi = eta*t (start corners) or xi = (1-eta)*t
    (end corners), which keeps the rule exact for the polynomial model.
    """
    pe, we = _gauss01(order_eta)
    px, wx = _gauss01(order_xi)
    if kind is None:
        eta = np.repeat(pe, order_xi)
        xi = np.tile(px, order_eta)
        wts = np.repeat(we, order_xi) * np.tile(wx, order_eta)
    elif kind == "start":
        eta = np.repeat(pe, order_xi)
        xi = eta * np.tile(px, order_eta)
        wts = np.repeat(we, order_xi) * np.tile(wx, order_eta) * eta
    elif kind == "end":
        eta = np.repeat(pe, order_xi)
        xi = (1.0 - eta) * np.tile(px, order_eta)
        wts = np.repeat(we, order_xi) * np.tile(wx, order_eta) * (1.0 - eta)
    else:
        raise ValueError(f"unknown element kind {kind!r}")
    return eta, xi, wts


def rim_gram_matrices(kind: str | None, order_eta: int = 2, order_xi: int = 4,
                      order_edge: int = 2):
    """Reference 8x8 Gram matrices (G_M, G_B, G_F) for one element kind.

    With polynomial coefficient vectors p_i, p_j the physical element
    contributions are p_i^H G_M p_j (stiffness), h^2 p_i^H G_B p_j (mass)
    and p_i^H G_F p_j (boundary term along the xi = 0 edge, derivative
    taken toward the bulk).  Corner halves need the collapsed rule at
    orders (5, 4) to stay exact.
    """
    eta, xi, wts = _rim_quadrature(kind, order_eta, order_xi)
    mu = _monomials(eta, xi)
    d_eta, d_xi = _monomial_gradients(eta, xi)
    g_b = (mu * wts) @ mu.T
    g_m = (d_eta * wts) @ d_eta.T + (d_xi * wts) @ d_xi.T

    pe, we = _gauss01(order_edge)
    edge_mu = _monomials(pe, np.zeros_like(pe))
    edge_d = _monomial_gradients(pe, np.zeros_like(pe))[1]
    g_f = (edge_d * we) @ edge_mu.T
    return g_m, g_b, g_f


_GRAM_CACHE: dict[str | None, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _gram(kind: str | None):
    if kind not in _GRAM_CACHE:
        if kind is None:
            _GRAM_CACHE[kind] = rim_gram_matrices(None, 2, 4)
        else:
            _GRAM_CACHE[kind] = rim_gram_matrices(kind, 5, 4)
    return _GRAM_CACHE[kind]


def bulk_element_matrices(tri: Triangle, coeff_i, coeff_j):
    """Stiffness and mass contributions of one triangle.

    coeff_i, coeff_j are the (alpha, beta, gamma) coefficients of the two
    functions in reference coordinates, phi = alpha + beta*eta + gamma*xi.
    """
    tm = reference_triangle_map(tri)
    _, bi, gi = coeff_i
    _, bj, gj = coeff_j
    ai, aj = coeff_i[0], coeff_j[0]
    m = (tm.jacobian / 2.0) * (
        (bi * tm.eta_x + gi * tm.xi_x) * (bj * tm.eta_x + gj * tm.xi_x)
        + (bi * tm.eta_y + gi * tm.xi_y) * (bj * tm.eta_y + gj * tm.xi_y)
    )
    b = (tm.jacobian / 2.0) * (
        ai * aj
        + (ai * bj + bi * aj) / 3.0
        + (ai * gj + gi * aj) / 3.0
        + (bi * gj + gi * bj) / 12.0
        + (bi * bj) / 6.0
        + (gi * gj) / 6.0
    )
    return m, b


def rim_element_matrices(element: RimElement, p_i, p_j, h: float):
    """(M, B, F) contributions of one rim element for two coefficient sets."""
    if h <= 0:
        raise GeometryError(f"degenerate rim element, h = {h}")
    g_m, g_b, g_f = _gram(element.corner_kind)
    p_i = np.asarray(p_i, dtype=complex)
    p_j = np.asarray(p_j, dtype=complex)
    m = p_i.conj() @ g_m @ p_j
    b = h * h * (p_i.conj() @ g_b @ p_j)
    f = p_i.conj() @ g_f @ p_j
    return m, b, f


def _bulk_matrices(mesh: Mesh):
    """Sparse bulk stiffness and mass over all triangles (real CSR)."""
    tris = mesh.triangles
    nt = len(tris)
    verts = np.array([t.vertices for t in tris])  # (nt, 3, 2)
    vidx = np.array([t.vertex_indices for t in tris])  # (nt, 3)

    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    det = e1[:, 0] * e2[:, 1] - e2[:, 0] * e1[:, 1]
    jac = np.abs(det)
    if np.any(jac < 1e-14):
        raise GeometryError("degenerate bulk triangle")
    # rows of the inverse Jacobian: grad eta, grad xi
    inv = np.empty((nt, 2, 2))
    inv[:, 0, 0] = e2[:, 1] / det
    inv[:, 0, 1] = -e2[:, 0] / det
    inv[:, 1, 0] = -e1[:, 1] / det
    inv[:, 1, 1] = e1[:, 0] / det

    # physical gradients of the three hats: (nt, 3, 2)
    grads = np.einsum("vk,tkd->tvd", _HAT_COEFFS[:, 1:], inv)
    m_loc = 0.5 * jac[:, None, None] * np.einsum("tvd,twd->tvw", grads, grads)

    b_ref = np.empty((3, 3))
    for v in range(3):
        for w in range(3):
            av, bv, gv = _HAT_COEFFS[v]
            aw, bw, gw = _HAT_COEFFS[w]
            b_ref[v, w] = (
                av * aw
                + (av * bw + bv * aw) / 3.0
                + (av * gw + gv * aw) / 3.0
                + (bv * gw + gv * bw) / 12.0
                + bv * bw / 6.0
                + gv * gw / 6.0
            )
    b_loc = 0.5 * jac[:, None, None] * b_ref[None, :, :]

    rows = np.repeat(vidx, 3, axis=1).ravel()
    cols = np.tile(vidx, (1, 3)).ravel()
    shape = (mesh.N_B, mesh.N_B)
    m_mat = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=shape).tocsr()
    b_mat = sp.coo_matrix((b_loc.ravel(), (rows, cols)), shape=shape).tocsr()
    return m_mat, b_mat


def ring_presence(mesh: Mesh) -> list[list[tuple[int, int]]]:
    """Rim support of the interface-ring bulk hats, per rim element.

    A bulk hat at an interface lattice node stays continuous by extending
    into the adjacent rim elements as the polynomial with value 1 on its
    d-row slot and 0 on every other node row.  For element k the list holds
    (slot, bulk_index) pairs, where slot is the position of the d-value in
    the V-matrix column order: 5 for the node column k, 4 for column k+1.

    Corner columns have no interface node and contribute nothing.  The four
    interface nodes on the bulk-corner diagonals host two coincident d-slots
    (one per incident side); tying both to the hat would over-constrain the
    corner elements and lose exact constants, so those hats stay bulk-only.
    """
    q = mesh.intervals_per_side

    def extended(j: int) -> int | None:
        if j % q in (0, 1, q - 1):
            return None
        return mesh.ring_node_index(j)

    out = []
    for k in range(mesh.N_S):
        entries = []
        ring_left = extended(k)
        ring_right = extended((k + 1) % mesh.N_S)
        if ring_left is not None:
            entries.append((5, ring_left))
        if ring_right is not None:
            entries.append((4, ring_right))
        out.append(entries)
    return out


def bulk_continuation(mesh: Mesh, basis: BoundaryBasis) -> sp.csr_matrix:
    """Hat-function coefficients of each boundary function in the bulk.

    Returns a sparse (N_B, size) matrix whose column t holds the interface
    lattice node values of function t: the d-row values placed at the ring
    node of each non-corner boundary node.
    """
    rows, cols, vals = [], [], []
    q = mesh.intervals_per_side
    for j in range(mesh.N_S):
        if j % q == 0:
            continue
        ring = mesh.ring_node_index(j)
        nz = np.nonzero(np.abs(basis.d[j]) > 0)[0]
        for t in nz:
            rows.append(ring)
            cols.append(t)
            vals.append(basis.d[j, t])
    return sp.csr_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(mesh.N_B, basis.size)
    )


@dataclass(frozen=True)
class AssembledSystem:
    """Matrices of the generalized eigenproblem (M - F) u = lambda B u."""

    m: sp.csr_matrix
    b: sp.csr_matrix
    f: sp.csr_matrix
    mesh_n: int
    n_bulk: int
    n_boundary: int
    rank_r: int
    label: str
    compatibility_residual: float
    bc_residual: float
    sigma_hint: float
    is_real: bool
    size: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "size", self.m.shape[0])

    def a_matrix(self) -> sp.csr_matrix:
        return (self.m - self.f).tocsr()

    def export_matrix_market(self, directory, stem: str = "system") -> list[str]:
        """Write M, B, F in Matrix Market coordinate format (complex general)."""
        import os

        paths = []
        for name, mat in (("M", self.m), ("B", self.b), ("F", self.f)):
            path = os.path.join(str(directory), f"{stem}_{name}.mtx")
            scipy.io.mmwrite(path, mat.astype(complex), symmetry="general")
            paths.append(path)
        return paths


def _hermiticity_deviation(mat: sp.spmatrix) -> float:
    delta = (mat - mat.getH()).tocoo()
    return float(np.abs(delta.data).max()) if delta.nnz else 0.0


def _maybe_real(mat: sp.csr_matrix, make_real: bool) -> sp.csr_matrix:
    if make_real:
        return sp.csr_matrix(mat.real)
    return mat


def _validate_hermitian(name: str, mat: sp.spmatrix) -> None:
    scale = float(np.abs(mat.data).max()) if mat.nnz else 1.0
    dev = _hermiticity_deviation(mat)
    if dev > HERMITICITY_TOL * max(scale, 1.0):
        raise ValidationError(
            f"assembled {name} is not Hermitian: deviation {dev:.3e} at scale {scale:.3e}"
        )


def assemble(mesh: Mesh, basis: BoundaryBasis) -> AssembledSystem:
    """Assemble the full M, B, F for a mesh and boundary basis.

    Bulk-bulk entries come from the triangles; boundary-boundary entries
    from the rim elements plus the hat continuations of d-carrying
    functions; cross entries couple the interface-ring hats with those
    continuations.  The family-1 rows of F vanish identically, which is
    asserted rather than assumed.
    """
    if basis.n_s != mesh.N_S:
        raise ConfigurationError(
            f"basis has N_S = {basis.n_s} but mesh has N_S = {mesh.N_S}"
        )
    if abs(basis.h - mesh.h) > 1e-14:
        raise ConfigurationError(f"basis h = {basis.h} but mesh h = {mesh.h}")

    m_bulk, b_bulk = _bulk_matrices(mesh)
    t_count = basis.size

    # rim contributions, batched over elements with per-kind Gram matrices
    coeffs = basis.element_coefficients()  # (N_S, 8, T)
    g_m = np.empty((mesh.N_S, 8, 8))
    g_b = np.empty((mesh.N_S, 8, 8))
    g_f = np.empty((mesh.N_S, 8, 8))
    for k, el in enumerate(mesh.rim_elements):
        g_m[k], g_b[k], g_f[k] = _gram(el.corner_kind)

    flat = coeffs.reshape(mesh.N_S * 8, t_count)

    def boundary_block(gram, scale=1.0):
        q = np.matmul(gram, coeffs).reshape(mesh.N_S * 8, t_count)
        return scale * (flat.conj().T @ q)

    m_bdry = boundary_block(g_m)
    b_bdry = boundary_block(g_b, scale=mesh.h**2)
    f_bdry = boundary_block(g_f)

    fam1 = 2 * mesh.N_S
    fam1_max = float(np.abs(f_bdry[:fam1, :]).max()) if fam1 else 0.0
    fam1_max = max(fam1_max, float(np.abs(f_bdry[:, :fam1]).max()) if fam1 else 0.0)
    if fam1_max > 1e-12:
        raise ValidationError(
            f"family-1 rows of F do not vanish (max {fam1_max:.3e}); "
            "boundary basis construction is inconsistent"
        )

    # bulk continuations of d-carrying boundary functions
    cont = bulk_continuation(mesh, basis)
    m_cross = (m_bulk @ cont).tolil()  # (N_B, T)
    b_cross = (b_bulk @ cont).tolil()
    m_bdry = m_bdry + (cont.getH() @ (m_bulk @ cont)).toarray()
    b_bdry = b_bdry + (cont.getH() @ (b_bulk @ cont)).toarray()

    # rim extensions of the interface-ring bulk hats: without them the
    # space is discontinuous across the bulk interface and picks up a
    # spurious zero mode (the bulk constant)
    from .boundary_basis import V_MATRIX

    presence = ring_presence(mesh)
    ring_rows, ring_cols, m_ring_vals, b_ring_vals = [], [], [], []
    for k, entries in enumerate(presence):
        if not entries:
            continue
        gm, gb, _ = g_m[k], g_b[k], g_f[k]
        for slot_a, node_a in entries:
            va = V_MATRIX[:, slot_a]
            # ring-hat x ring-hat corrections inside this element
            for slot_b, node_b in entries:
                vb = V_MATRIX[:, slot_b]
                ring_rows.append(node_a)
                ring_cols.append(node_b)
                m_ring_vals.append(va @ gm @ vb)
                b_ring_vals.append(mesh.h**2 * (va @ gb @ vb))
            # ring-hat x boundary-function cross terms inside this element
            m_cross[node_a, :] += (va @ gm) @ coeffs[k]
            b_cross[node_a, :] += mesh.h**2 * ((va @ gb) @ coeffs[k])
    shape_bb = (mesh.N_B, mesh.N_B)
    m_bulk = m_bulk + sp.coo_matrix((m_ring_vals, (ring_rows, ring_cols)), shape=shape_bb).tocsr()
    b_bulk = b_bulk + sp.coo_matrix((b_ring_vals, (ring_rows, ring_cols)), shape=shape_bb).tocsr()
    m_cross = m_cross.tocsr()
    b_cross = b_cross.tocsr()

    make_real = basis.is_real
    m_full = sp.bmat(
        [[m_bulk.astype(complex), m_cross], [m_cross.getH(), sp.csr_matrix(m_bdry)]],
        format="csr",
    )
    b_full = sp.bmat(
        [[b_bulk.astype(complex), b_cross], [b_cross.getH(), sp.csr_matrix(b_bdry)]],
        format="csr",
    )
    f_full = sp.bmat(
        [
            [sp.csr_matrix((mesh.N_B, mesh.N_B), dtype=complex), None],
            [None, sp.csr_matrix(f_bdry)],
        ],
        format="csr",
    )

    # symmetrize roundoff after validating it really is roundoff
    for name, mat in (("M", m_full), ("B", b_full), ("F", f_full)):
        _validate_hermitian(name, mat)
    m_full = _maybe_real(0.5 * (m_full + m_full.getH()), make_real)
    b_full = _maybe_real(0.5 * (b_full + b_full.getH()), make_real)
    f_full = _maybe_real(0.5 * (f_full + f_full.getH()), make_real)

    return AssembledSystem(
        m=m_full.tocsr(),
        b=b_full.tocsr(),
        f=f_full.tocsr(),
        mesh_n=mesh.n,
        n_bulk=mesh.N_B,
        n_boundary=t_count,
        rank_r=basis.rank_r,
        label=basis.label,
        compatibility_residual=basis.compatibility_residual,
        bc_residual=basis.bc_residual,
        sigma_hint=-4.0 * basis.strength**2 - 10.0,
        is_real=make_real,
    )


def assemble_natural(mesh: Mesh, basis: BoundaryBasis, lambda_nodes) -> AssembledSystem:
    """Standard natural-boundary-condition variant for Robin-type problems.

    Keeps the Neumann M and B but replaces F by the boundary mass term
    weighted by the piecewise-linear interpolation of the per-node Robin
    values ``lambda_nodes``.
    """
    if basis.label != "neumann":
        raise ConfigurationError(
            f"natural assembly requires the Neumann basis, got {basis.label!r}"
        )
    lam = np.asarray(lambda_nodes, dtype=float)
    if lam.shape != (mesh.N_S,):
        raise ConfigurationError(
            f"lambda_nodes must have shape ({mesh.N_S},), got {lam.shape}"
        )

    base = assemble(mesh, basis)

    idx = np.arange(mesh.N_S)
    nxt = (idx + 1) % mesh.N_S
    tr0 = basis.a[idx]  # (N_S, T) trace at the left node of each interval
    tr1 = basis.a[nxt]
    lam0 = lam[idx]
    lam1 = lam[nxt]

    pts, wts = _gauss01(2)  # integrand is cubic per interval
    t_count = basis.size
    f_bdry = np.zeros((t_count, t_count), dtype=complex)
    for g, wg in zip(pts, wts):
        vals = (1.0 - g) * tr0 + g * tr1  # (N_S, T)
        lamg = (1.0 - g) * lam0 + g * lam1  # (N_S,)
        f_bdry += mesh.h * wg * (vals.conj() * lamg[:, None]).T @ vals

    f_full = sp.bmat(
        [
            [sp.csr_matrix((mesh.N_B, mesh.N_B), dtype=complex), None],
            [None, sp.csr_matrix(f_bdry)],
        ],
        format="csr",
    )
    _validate_hermitian("F", f_full)
    f_full = _maybe_real(0.5 * (f_full + f_full.getH()), base.is_real)

    strength = float(np.abs(lam).max())
    return AssembledSystem(
        m=base.m,
        b=base.b,
        f=f_full.tocsr(),
        mesh_n=mesh.n,
        n_bulk=mesh.N_B,
        n_boundary=t_count,
        rank_r=basis.rank_r,
        label=f"natural({basis.label})",
        compatibility_residual=basis.compatibility_residual,
        bc_residual=basis.bc_residual,
        sigma_hint=-4.0 * strength**2 - 10.0,
        is_real=base.is_real,
    )
