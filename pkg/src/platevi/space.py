"""Lagrange P1/P2 spaces with homogeneous Dirichlet elimination.

DOFs are numbered over all nodes first ("full" numbering: vertices, then
edge midpoints for P2) and the free DOFs are the nodes off the boundary,
kept in increasing full order. Operators are assembled in full numbering and
restricted.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGES

BARY_TOL = 1e-12


def shape_values(degree, lam):
    """Local shape functions at barycentric points ``lam`` (..., 3)."""
    lam = np.asarray(lam, dtype=float)
    if degree == 1:
        return lam.copy()
    vert = lam * (2.0 * lam - 1.0)
    edge = np.stack([4.0 * lam[..., a] * lam[..., b] for a, b in LOCAL_EDGES], axis=-1)
    return np.concatenate([vert, edge], axis=-1)


def shape_dlam(degree, lam):
    """Derivatives d(phi_i)/d(lambda_j), shape (..., nloc, 3)."""
    lam = np.asarray(lam, dtype=float)
    if degree == 1:
        return np.broadcast_to(np.eye(3), lam.shape[:-1] + (3, 3)).copy()
    out = np.zeros(lam.shape[:-1] + (6, 3))
    for i in range(3):
        out[..., i, i] = 4.0 * lam[..., i] - 1.0
    for k, (a, b) in enumerate(LOCAL_EDGES):
        out[..., 3 + k, a] = 4.0 * lam[..., b]
        out[..., 3 + k, b] = 4.0 * lam[..., a]
    return out


def shape_d2lam(degree):
    """Second derivatives in barycentric variables, shape (nloc, 3, 3)."""
    if degree == 1:
        return np.zeros((3, 3, 3))
    out = np.zeros((6, 3, 3))
    for i in range(3):
        out[i, i, i] = 4.0
    for k, (a, b) in enumerate(LOCAL_EDGES):
        out[3 + k, a, b] = out[3 + k, b, a] = 4.0
    return out


def nloc(degree):
    return 3 if degree == 1 else 6


@dataclass(frozen=True, eq=False)
class FeSpace:
    """Continuous Lagrange space of degree 1 or 2 vanishing on the boundary.

    Attributes
    ----------
    cell_dofs : (T, nloc) full DOF indices per triangle
    nodes : (N, 2) coordinates of every full DOF
    free : (ndof,) full indices of the free DOFs
    full_to_free : (N,) free index of every full DOF, -1 when eliminated
    vertex_dof_map : (V,) free index of each mesh vertex, -1 on the boundary
    """

    mesh: object
    degree: int
    cell_dofs: np.ndarray
    nodes: np.ndarray
    free: np.ndarray
    full_to_free: np.ndarray
    vertex_dof_map: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __repr__(self):
        return f"FeSpace(P{self.degree}, ndof={self.ndof}, {self.mesh!r})"

    @property
    def ndof(self):
        return len(self.free)

    @property
    def ndof_full(self):
        return len(self.nodes)

    @property
    def boundary_dofs(self):
        return np.flatnonzero(self.full_to_free < 0)

    @property
    def nloc(self):
        return self.cell_dofs.shape[1]

    def restriction(self):
        """Sparse (ndof, N) matrix selecting free DOFs from a full vector."""
        if "R" not in self._cache:
            self._cache["R"] = sp.csr_matrix(
                (np.ones(self.ndof), (np.arange(self.ndof), self.free)),
                shape=(self.ndof, self.ndof_full))
        return self._cache["R"]

    def to_full(self, coeffs):
        out = np.zeros(self.ndof_full)
        out[self.free] = coeffs
        return out

    def vertex_values(self, coeffs):
        """Values at every mesh vertex (zero on the boundary)."""
        return self.to_full(coeffs)[: self.mesh.num_vertices]

    def basis_gradients(self, lam):
        """Physical gradients of the local basis at reference points ``lam``
        (Q, 3); shape (T, Q, nloc, 2)."""
        g = self.mesh.barycentric_gradients()
        return np.einsum("qij,tjd->tqid", shape_dlam(self.degree, lam), g)

    def basis_hessians(self):
        """Physical Hessians of the local basis, constant per triangle; shape
        (T, nloc, 2, 2)."""
        if "H" not in self._cache:
            g = self.mesh.barycentric_gradients()
            self._cache["H"] = np.einsum("ijk,tjd,tke->tide", shape_d2lam(self.degree), g, g)
        return self._cache["H"]


def build_space(mesh, degree):
    """P1 or P2 space on ``mesh`` with all boundary nodes eliminated."""
    if degree not in (1, 2):
        raise ValueError(f"unsupported polynomial degree {degree!r}; use 1 or 2")
    nv = mesh.num_vertices
    if degree == 1:
        cell_dofs = np.array(mesh.triangles)
        nodes = np.array(mesh.vertices)
        bmask = np.array(mesh.boundary_vertices)
    else:
        cell_dofs = np.hstack([mesh.triangles, mesh.triangle_edges + nv])
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        nodes = np.vstack([mesh.vertices, mids])
        bmask = np.concatenate([mesh.boundary_vertices, mesh.boundary_edges])
    free = np.flatnonzero(~bmask)
    full_to_free = np.full(len(nodes), -1, dtype=np.int64)
    full_to_free[free] = np.arange(len(free))
    vertex_dof_map = full_to_free[:nv].copy()
    for arr in (cell_dofs, nodes, free, full_to_free, vertex_dof_map):
        arr.flags.writeable = False
    return FeSpace(mesh, degree, cell_dofs, nodes, free, full_to_free, vertex_dof_map)


def eval_basis(space, triangle, point):
    """Values, gradients and Hessians of the local basis of ``triangle`` at
    ``point``.

    Returns arrays of shape (nloc,), (nloc, 2), (nloc, 2, 2).
    """
    lam = space.mesh.barycentric(np.array([triangle]), np.asarray(point, dtype=float)[None])[0]
    if lam.min() < -BARY_TOL:
        raise ValueError(f"point {tuple(point)} lies outside triangle {triangle}")
    g = space.mesh.barycentric_gradients()[triangle]
    values = shape_values(space.degree, lam)
    grads = shape_dlam(space.degree, lam) @ g
    hess = space.basis_hessians()[triangle]
    return values, grads, hess.copy()


def evaluate(space, coeffs, tri, lam, full=False):
    """Evaluate a finite element function at barycentric points ``lam``
    (N, 3) of triangles ``tri`` (N,)."""
    u = coeffs if full else space.to_full(coeffs)
    phi = shape_values(space.degree, lam)
    return np.einsum("ni,ni->n", phi, u[space.cell_dofs[tri]])


def locate_in_ancestor(mesh, ancestor, tri, points):
    """Triangles of ``ancestor`` containing ``points`` that lie in ``tri`` of
    a refinement of it."""
    tri = np.asarray(tri)
    m = mesh
    while m is not ancestor:
        if m.parent is None:
            raise ValueError("mesh is not a refinement of the given ancestor")
        tri = m.parent_triangle[tri]
        m = m.parent
    return tri, ancestor.barycentric(tri, points)


def interpolate_nodal(space, f):
    """Nodal interpolant of the callable ``f(x, y)``; boundary values are
    dropped."""
    x = space.nodes[space.free]
    return np.asarray(f(x[:, 0], x[:, 1]), dtype=float) * np.ones(space.ndof)


def prolongation(coarse, fine):
    """Sparse (N_fine, N_coarse) matrix in full numbering that represents a
    coarse function exactly on a nested refinement."""
    if coarse.degree != fine.degree:
        raise ValueError("prolongation needs spaces of equal degree")
    if fine.mesh is coarse.mesh:
        return sp.identity(coarse.ndof_full, format="csr")
    if coarse.mesh not in fine.mesh.ancestors():
        raise ValueError("fine mesh is not a nested refinement of the coarse mesh")
    deg = coarse.degree
    k = nloc(deg)
    ref_nodes = np.vstack([np.eye(3), 0.5 * (np.eye(3)[LOCAL_EDGES[:, 0]] + np.eye(3)[LOCAL_EDGES[:, 1]])])[:k]
    fm = fine.mesh
    pts = fm.to_reference(np.arange(fm.num_triangles)[:, None], ref_nodes[None])  # (T, k, 2)
    tri_f = np.repeat(np.arange(fm.num_triangles), k)
    tri_c, lam = locate_in_ancestor(fm, coarse.mesh, tri_f, pts.reshape(-1, 2))
    phi = shape_values(deg, lam)
    phi[np.abs(phi) < 1e-14] = 0.0
    rows = np.repeat(fine.cell_dofs.ravel(), k)
    cols = coarse.cell_dofs[tri_c].ravel()
    vals = phi.ravel()
    # every fine node is visited once per adjacent fine triangle; keep one visit
    _, idx = np.unique(fine.cell_dofs.ravel(), return_index=True)
    first_slot = np.zeros(len(fine.cell_dofs.ravel()), dtype=bool)
    first_slot[idx] = True
    keep = np.repeat(first_slot, k) & (vals != 0.0)
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])),
                         shape=(fine.ndof_full, coarse.ndof_full))


def prolong(coarse, fine, coeffs):
    """Free coefficients on ``fine`` of a coarse free-coefficient vector."""
    P = prolongation(coarse, fine)
    return (P @ coarse.to_full(coeffs))[fine.free]


def inject(coarse, fine, coeffs):
    """Restrict a fine free-coefficient vector to the coarse nodes; nested
    coarse nodes keep their full index on every refinement."""
    full = fine.to_full(coeffs)
    return full[: coarse.ndof_full][coarse.free]
