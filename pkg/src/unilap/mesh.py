"""Structured discretization of the unit square with a boundary rim.

The domain [0,1]^2 is split into a triangulated bulk [h,1-h]^2 and a rim of
width h made of square boundary elements, one per boundary interval.  The
bulk carries (n-2)^2 lattice nodes at step h = 1/(n-1); the boundary chain
carries N_S = 4(n-1) intervals of length h traversed counterclockwise from
the bottom-left corner.  Each physical corner square hosts two logical rim
elements, one per incident boundary interval, cut by the diagonal through
the domain corner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GeometryError

__all__ = [
    "Mesh",
    "Triangle",
    "TriangleMap",
    "RimElement",
    "build_mesh",
    "reference_triangle_map",
]

# Unit tangents of the four sides in counterclockwise order (bottom, right,
# top, left) and the matching inward normals (tangent rotated by +90 deg).
_SIDE_TANGENT = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
_SIDE_NORMAL = np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class Triangle:
    """A bulk triangle with counterclockwise vertex order."""

    vertex_indices: tuple[int, int, int]
    vertices: np.ndarray  # (3, 2)
    jacobian: float


@dataclass(frozen=True)
class TriangleMap:
    """Derivatives of the reference coordinates of a triangle.

    ``eta_x`` etc. are the entries of the inverse Jacobian of the affine map
    sending the reference triangle (0,0)-(1,0)-(0,1) to the physical one;
    ``jacobian`` is the absolute determinant (twice the area).
    """

    eta_x: float
    eta_y: float
    xi_x: float
    xi_y: float
    jacobian: float


@dataclass(frozen=True)
class RimElement:
    """One boundary element, owned by a single boundary interval.

    The local frame maps the reference square (eta, xi) in [0,1]^2 to
    ``origin + h*eta*tangent + h*xi*normal`` so that xi=0 lies on the outer
    boundary and xi=1 on the bulk interface.  On the four corner squares the
    element's integration domain is only half of the frame square:
    ``corner_kind == "start"`` restricts to xi <= eta (diagonal through the
    corner at eta=0) and ``"end"`` to xi <= 1-eta (corner at eta=1).
    """

    interval: int  # 0-based interval index
    side: int  # 0 bottom, 1 right, 2 top, 3 left
    origin: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    h: float
    corner_kind: str | None = None
    boundary_orientation: float = 1.0

    @property
    def boundary_interval_index(self) -> int:
        """1-based interval label used in external reports."""
        return self.interval + 1

    @property
    def corner_flag(self) -> bool:
        return self.corner_kind is not None

    @property
    def square_geometry(self) -> np.ndarray:
        """Physical corners of the frame square at (eta, xi) in CCW order."""
        ref = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        return self.to_physical(ref[:, 0], ref[:, 1])

    def to_physical(self, eta, xi):
        """Map reference coordinates to physical points, shape (..., 2)."""
        eta = np.asarray(eta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return (
            self.origin
            + self.h * eta[..., None] * self.tangent
            + self.h * xi[..., None] * self.normal
        )

    def to_reference(self, points):
        """Inverse of :meth:`to_physical` for an (..., 2) array of points."""
        rel = (np.asarray(points, dtype=float) - self.origin) / self.h
        eta = rel @ self.tangent
        xi = rel @ self.normal
        return eta, xi

    def contains_reference(self, eta, xi, tol=1e-12):
        """Whether reference points fall inside the element's domain."""
        inside = (eta >= -tol) & (eta <= 1 + tol) & (xi >= -tol) & (xi <= 1 + tol)
        if self.corner_kind == "start":
            inside &= xi <= eta + tol
        elif self.corner_kind == "end":
            inside &= xi <= 1 - eta + tol
        return inside


@dataclass(frozen=True)
class Mesh:
    """Immutable discretization data for a given odd n >= 5."""

    n: int
    h: float
    bulk_nodes: np.ndarray  # (N_B, 2)
    triangles: list[Triangle]
    rim_elements: list[RimElement]
    boundary_nodes: np.ndarray  # (N_S, 2)
    N_B: int = field(init=False)
    N_S: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "N_B", len(self.bulk_nodes))
        object.__setattr__(self, "N_S", len(self.boundary_nodes))

    @property
    def intervals_per_side(self) -> int:
        return self.n - 1

    def bulk_index(self, i: int, j: int) -> int:
        """Row-major 0-based index of the bulk lattice node at (i*h, j*h).

        i, j are 1-based lattice coordinates in 1..n-2.  With this ordering
        the 1-based labels alternate star-like (odd) / diamond-like (even).
        """
        m = self.n - 2
        if not (1 <= i <= m and 1 <= j <= m):
            raise IndexError(f"lattice coordinates ({i}, {j}) outside bulk")
        return (j - 1) * m + (i - 1)

    def is_star_node(self, index: int) -> bool:
        """Star-like nodes carry odd 1-based labels (8 incident triangles
        when interior); diamond-like carry even labels (4 triangles)."""
        return (index + 1) % 2 == 1

    def ring_node_index(self, j: int) -> int | None:
        """Bulk node index hosting the d-row value of boundary node j.

        Boundary nodes at domain corners (j multiple of n-1) have no bulk
        interface node; their d-values live entirely inside the corner
        squares and the method returns None.
        """
        q = self.intervals_per_side
        if j % q == 0:
            return None
        side = j // q
        pos = self.boundary_nodes[j] + self.h * _SIDE_NORMAL[side]
        i_lat = int(round(pos[0] / self.h))
        j_lat = int(round(pos[1] / self.h))
        return self.bulk_index(i_lat, j_lat)

    def triangle_count_per_node(self) -> np.ndarray:
        counts = np.zeros(self.N_B, dtype=int)
        for tri in self.triangles:
            for v in tri.vertex_indices:
                counts[v] += 1
        return counts

    def interior_bulk_mask(self) -> np.ndarray:
        """True for bulk nodes not on the bulk-rim interface ring."""
        m = self.n - 2
        ii, jj = np.meshgrid(np.arange(1, m + 1), np.arange(1, m + 1))
        return ((ii > 1) & (ii < m) & (jj > 1) & (jj < m)).ravel()

    def dump_json(self, path) -> None:
        """Write the mesh as JSON (debug interface; schema not bit-stable).

        Keys: n, h, N_B, N_S, bulk_nodes [[x,y]...], triangles
        [{"vertices": 1-based indices, "jacobian": J}], boundary_nodes,
        rim_elements [{"interval": 1-based, "side", "corners", "tangent",
        "normal", "corner": "start"|"end"|null}].
        """
        data = {
            "n": self.n,
            "h": self.h,
            "N_B": self.N_B,
            "N_S": self.N_S,
            "bulk_nodes": self.bulk_nodes.tolist(),
            "boundary_nodes": self.boundary_nodes.tolist(),
            "triangles": [
                {
                    "vertices": [v + 1 for v in tri.vertex_indices],
                    "jacobian": tri.jacobian,
                }
                for tri in self.triangles
            ],
            "rim_elements": [
                {
                    "interval": el.boundary_interval_index,
                    "side": el.side,
                    "corners": el.square_geometry.tolist(),
                    "tangent": el.tangent.tolist(),
                    "normal": el.normal.tolist(),
                    "corner": el.corner_kind,
                }
                for el in self.rim_elements
            ],
        }
        with open(path, "w") as f:
            json.dump(data, f)


def build_mesh(n: int) -> Mesh:
    """Build the discretization for an odd grid parameter n >= 5.

    The bulk lattice has (n-2)^2 nodes ordered row-major bottom-to-top; the
    alternating-diagonal triangulation makes odd-labelled nodes star-like and
    even-labelled ones diamond-like.  Boundary intervals are ordered
    counterclockwise starting at the bottom-left corner (0, 0).
    """
    if n % 2 == 0:
        raise ConfigurationError(f"n must be odd, got {n}")
    if n < 5:
        raise ConfigurationError(f"n must be at least 5, got {n}")

    h = 1.0 / (n - 1)
    m = n - 2  # lattice nodes per axis

    xs = h * np.arange(1, m + 1)
    gx, gy = np.meshgrid(xs, xs)  # row-major: y outer, x inner
    bulk_nodes = np.column_stack([gx.ravel(), gy.ravel()])

    def idx(i, j):  # 1-based lattice coords -> 0-based node index
        return (j - 1) * m + (i - 1)

    triangles = []
    for sj in range(m - 1):  # squares, 0-based
        for si in range(m - 1):
            bl = idx(si + 1, sj + 1)
            br = idx(si + 2, sj + 1)
            tr = idx(si + 2, sj + 2)
            tl = idx(si + 1, sj + 2)
            if (si + sj) % 2 == 0:
                # diagonal from bottom-left to top-right
                tri_indices = [(bl, br, tr), (bl, tr, tl)]
            else:
                # diagonal from top-left to bottom-right
                tri_indices = [(bl, br, tl), (br, tr, tl)]
            for vi in tri_indices:
                verts = bulk_nodes[list(vi)]
                det = (verts[1, 0] - verts[0, 0]) * (verts[2, 1] - verts[0, 1]) - (
                    verts[2, 0] - verts[0, 0]
                ) * (verts[1, 1] - verts[0, 1])
                triangles.append(Triangle(vi, verts, abs(det)))

    q = n - 1  # intervals per side
    N_S = 4 * q
    boundary_nodes = np.empty((N_S, 2))
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    for k in range(N_S):
        side, mfrac = divmod(k, q)
        boundary_nodes[k] = corners[side] + mfrac * h * _SIDE_TANGENT[side]

    rim_elements = []
    for k in range(N_S):
        side, mfrac = divmod(k, q)
        if mfrac == 0:
            kind = "start"
        elif mfrac == q - 1:
            kind = "end"
        else:
            kind = None
        rim_elements.append(
            RimElement(
                interval=k,
                side=side,
                origin=boundary_nodes[k].copy(),
                tangent=_SIDE_TANGENT[side].copy(),
                normal=_SIDE_NORMAL[side].copy(),
                h=h,
                corner_kind=kind,
            )
        )

    return Mesh(
        n=n,
        h=h,
        bulk_nodes=bulk_nodes,
        triangles=triangles,
        rim_elements=rim_elements,
        boundary_nodes=boundary_nodes,
    )


def reference_triangle_map(tri: Triangle) -> TriangleMap:
    """Inverse-Jacobian entries of the map from the reference triangle.

    Returns the true derivatives (eta_x, eta_y, xi_x, xi_y) of the reference
    coordinates with respect to physical ones, together with the absolute
    Jacobian.  Rejects degenerate triangles.
    """
    (x1, y1), (x2, y2), (x3, y3) = tri.vertices
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    jac = abs(det)
    if jac < 1e-14:
        raise GeometryError(f"degenerate triangle with jacobian {jac:.3e}")
    return TriangleMap(
        eta_x=(y3 - y1) / det,
        eta_y=(x1 - x3) / det,
        xi_x=(y1 - y2) / det,
        xi_y=(x2 - x1) / det,
        jacobian=jac,
    )
