"""Conforming triangulations of polygonal domains.

Meshes are immutable after construction. Edges are numbered by sorting
their (lower, higher) vertex pairs lexicographically, so the numbering is a
deterministic function of the triangle list.
"""
from dataclasses import dataclass, field

import numpy as np

# local edge k of a triangle is the edge opposite local vertex k
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with classified edges.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise
    edges : (E, 2) int array, vertex pairs with ``edges[:, 0] < edges[:, 1]``
    edge_triangles : (E, 2) int array
        Adjacent triangles ordered by index; ``-1`` in the second column on
        boundary edges.
    edge_normals : (E, 2) float array
        Unit normal pointing out of ``edge_triangles[:, 0]``.
    edge_lengths : (E,) float array
    triangle_edges : (T, 3) int array, global edge opposite each local vertex
    parent : Mesh or None
        Coarse mesh this one was refined from.
    parent_triangle : (T,) int array or None
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    triangle_edges: np.ndarray
    parent: "Mesh | None" = None
    parent_triangle: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __repr__(self):
        return (f"Mesh({self.num_vertices} vertices, {self.num_triangles} triangles, "
                f"{self.num_edges} edges, h={self.h:.4g})")

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def boundary_edges(self):
        return self.edge_triangles[:, 1] < 0

    @property
    def interior_edges(self):
        return ~self.boundary_edges

    @property
    def boundary_vertices(self):
        if "bverts" not in self._cache:
            mask = np.zeros(self.num_vertices, dtype=bool)
            mask[self.edges[self.boundary_edges].ravel()] = True
            mask.flags.writeable = False
            self._cache["bverts"] = mask
        return self._cache["bverts"]

    @property
    def areas(self):
        if "areas" not in self._cache:
            p = self.vertices[self.triangles]
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            a = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
            a.flags.writeable = False
            self._cache["areas"] = a
        return self._cache["areas"]

    @property
    def diameters(self):
        """Per-triangle diameter h_T (longest edge)."""
        if "hT" not in self._cache:
            p = self.vertices[self.triangles]
            lens = np.stack([np.hypot(*(p[:, b] - p[:, a]).T) for a, b in LOCAL_EDGES], axis=1)
            hT = lens.max(axis=1)
            hT.flags.writeable = False
            self._cache["hT"] = hT
        return self._cache["hT"]

    @property
    def h(self):
        return float(self.diameters.max())

    def barycentric_gradients(self):
        """Constant gradients of the barycentric coordinates, shape (T, 3, 2)."""
        if "grads" not in self._cache:
            p = self.vertices[self.triangles]
            # gradient of lambda_k is the inward normal of the opposite edge / (2 area)
            g = np.empty((self.num_triangles, 3, 2))
            for k, (a, b) in enumerate(LOCAL_EDGES):
                e = p[:, b] - p[:, a]
                g[:, k, 0] = -e[:, 1]
                g[:, k, 1] = e[:, 0]
            g /= (2.0 * self.areas)[:, None, None]
            g.flags.writeable = False
            self._cache["grads"] = g
        return self._cache["grads"]

    def barycentric(self, tri, points):
        """Barycentric coordinates of ``points`` (N, 2) in triangles ``tri`` (N,)."""
        tri = np.asarray(tri)
        points = np.asarray(points, dtype=float)
        p0 = self.vertices[self.triangles[tri, 0]]
        g = self.barycentric_gradients()[tri]
        l12 = np.einsum("...kd,...d->...k", g[..., 1:, :], points - p0)
        l0 = 1.0 - l12.sum(axis=-1)
        return np.concatenate([l0[..., None], l12], axis=-1)

    def to_reference(self, tri, bary):
        """Physical coordinates of barycentric points ``bary`` (..., 3) in ``tri``."""
        p = self.vertices[self.triangles[tri]]
        return np.einsum("...k,...kd->...d", bary, p)

    def ancestors(self):
        """Chain of parent meshes, nearest first."""
        out = []
        m = self.parent
        while m is not None:
            out.append(m)
            m = m.parent
        return out


def from_triangles(vertices, triangles, parent=None, parent_triangle=None):
    """Build a Mesh from vertex coordinates and counterclockwise triangles."""
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise ValueError("vertices must have shape (V, 2)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise ValueError("triangles must have shape (T, 3)")
    nt = len(triangles)

    local = triangles[:, LOCAL_EDGES]  # (T, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")
    triangle_edges = inverse.reshape(nt, 3)

    # adjacency sorted by triangle index: stable sort by edge keeps triangle order
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_triangles[:, 0] = owner[order[starts]]
    two = counts == 2
    edge_triangles[two, 1] = owner[order[starts[two] + 1]]

    a = vertices[edges[:, 0]]
    b = vertices[edges[:, 1]]
    d = b - a
    lengths = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    centroid = vertices[triangles[edge_triangles[:, 0]]].mean(axis=1)
    flip = np.einsum("ij,ij->i", normals, centroid - 0.5 * (a + b)) > 0
    normals[flip] *= -1.0

    for arr in (vertices, triangles, edges, edge_triangles, normals, lengths, triangle_edges):
        arr.flags.writeable = False
    m = Mesh(vertices, triangles, edges, edge_triangles, normals, lengths, triangle_edges,
             parent, parent_triangle)
    if np.any(m.areas <= 0):
        raise ValueError("triangles must be counterclockwise with positive area")
    return m


def unit_square_mesh(n):
    """Structured mesh of (0, 1)^2 with n x n cells, each cut along its
    lower-left to upper-right diagonal."""
    if int(n) != n or n < 1:
        raise ValueError(f"unit_square_mesh needs a positive integer n, got {n!r}")
    n = int(n)
    t = np.arange(n + 1) / n
    x, y = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([x.ravel(), y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return from_triangles(vertices, triangles)


def uniform_refine(m):
    """Split every triangle into four through its edge midpoints.

    Coarse vertex k keeps index k; the midpoint of coarse edge e becomes
    vertex ``V + e``. Child ``4 t + c`` of triangle ``t`` is the corner child
    at local vertex ``c`` for ``c < 3`` and the middle triangle for ``c = 3``.
    """
    nv = m.num_vertices
    mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    vertices = np.vstack([m.vertices, mids])
    v = m.triangles
    e = m.triangle_edges + nv  # midpoint opposite each local vertex
    children = np.stack([
        np.column_stack([v[:, 0], e[:, 2], e[:, 1]]),
        np.column_stack([e[:, 2], v[:, 1], e[:, 0]]),
        np.column_stack([e[:, 1], e[:, 0], v[:, 2]]),
        np.column_stack([e[:, 0], e[:, 1], e[:, 2]]),
    ], axis=1).reshape(-1, 3)
    parent_triangle = np.repeat(np.arange(m.num_triangles), 4)
    parent_triangle.flags.writeable = False
    return from_triangles(vertices, children, parent=m, parent_triangle=parent_triangle)


def refine(m, times):
    for _ in range(times):
        m = uniform_refine(m)
    return m


@dataclass(frozen=True)
class EdgeFrame:
    normal: np.ndarray
    tangent: np.ndarray
    triangles: tuple
    sign: float
    length: float
    boundary: bool


def edge_trace_frame(m, edge):
    """Orientation data for one edge.

    The normal points out of the lower-index adjacent triangle (outward on
    the boundary). Jumps are taken as trace from the lower-index triangle
    minus trace from the higher-index one; ``sign`` is the factor each side
    carries in a jump (+1 for the first triangle, -1 for the second).
    """
    if not 0 <= edge < m.num_edges:
        raise IndexError(f"edge index {edge} out of range")
    n = m.edge_normals[edge].copy()
    t = np.array([-n[1], n[0]])
    t0, t1 = (int(x) for x in m.edge_triangles[edge])
    boundary = t1 < 0
    tris = (t0,) if boundary else (t0, t1)
    return EdgeFrame(n, t, tris, 1.0, float(m.edge_lengths[edge]), boundary)


def polygon_area(points):
    x, y = np.asarray(points, dtype=float).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
