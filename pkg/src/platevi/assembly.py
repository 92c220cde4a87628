"""Discrete operators for the fourth-order problem

    beta (D^2 y, D^2 z) + (y, z) = (y_d, z)

in two flavours: the C0 interior penalty form on P2 and the mixed
(discrete Laplacian) form on P1.

Edge orientation follows :func:`platevi.mesh.edge_trace_frame`: the normal
points out of the lower-index triangle and a jump is (lower side) minus
(higher side). With that convention the consistency terms enter with a
minus sign.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fields import as_field
from .linalg import INNER_TOL, Factorization, LinearOperator, NotSPDError, SolverError, pcg
from .quadrature import quadrature
from .space import shape_dlam, shape_values

DEFAULT_SIGMA = 10.0
MASS_QDEG = 4
HESS_QDEG = 2
EDGE_QDEG = 4


class CoercivityError(ArithmeticError):
    """a_h(v, v) came out negative: the penalty is below coercivity."""


@dataclass
class ProblemSpec:
    """Data of the state-constrained control problem."""

    beta: float
    y_d: object
    psi: object
    sigma: float = DEFAULT_SIGMA
    method: str = "c0ip"

    def __post_init__(self):
        self.y_d = as_field(self.y_d)
        self.psi = as_field(self.psi)
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.method not in ("c0ip", "mixed"):
            raise ValueError(f"method must be 'c0ip' or 'mixed', got {self.method!r}")
        if self.method == "c0ip" and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def degree(self):
        return 2 if self.method == "c0ip" else 1

    def check_obstacle(self, mesh):
        """Require psi > 0 at the boundary quadrature points of ``mesh``."""
        rule = quadrature("interval", EDGE_QDEG)
        e = mesh.edges[mesh.boundary_edges]
        a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
        t = np.concatenate([[0.0], rule.points, [1.0]])
        pts = a[:, None] + t[None, :, None] * (b - a)[:, None]
        vmin = float(np.min(self.psi(pts[..., 0], pts[..., 1])))
        if not vmin > 0:
            raise ValueError(f"obstacle must be positive on the boundary (min {vmin:g})")
        return vmin


def _coo(space, local, rows=None, cols=None):
    """Sum local (T, k, k) blocks into a full-numbering CSR matrix."""
    dofs = space.cell_dofs if rows is None else rows
    cdofs = dofs if cols is None else cols
    k1, k2 = dofs.shape[1], cdofs.shape[1]
    r = np.repeat(dofs, k2, axis=1).ravel()
    c = np.tile(cdofs, (1, k1)).ravel()
    n = space.ndof_full
    return sp.csr_matrix((local.ravel(), (r, c)), shape=(n, n))


def _restrict(space, A):
    return sp.csr_matrix(A[space.free][:, space.free])


def mass_matrix(space, full=False, qdeg=MASS_QDEG):
    rule = quadrature("triangle", qdeg)
    lam = np.column_stack([1 - rule.points.sum(1), rule.points])
    phi = shape_values(space.degree, lam)  # (Q, k)
    ref = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
    local = 2.0 * space.mesh.areas[:, None, None] * ref[None]
    A = _coo(space, local)
    return A if full else _restrict(space, A)


def stiffness_matrix(space, full=False):
    """Gradient form (grad y, grad z); degree-2 rule is exact for P1 and P2."""
    rule = quadrature("triangle", HESS_QDEG)
    lam = np.column_stack([1 - rule.points.sum(1), rule.points])
    G = space.basis_gradients(lam)  # (T, Q, k, 2)
    local = 2.0 * space.mesh.areas[:, None, None] * np.einsum("q,tqid,tqjd->tij", rule.weights, G, G)
    A = _coo(space, local)
    return A if full else _restrict(space, A)


def hessian_matrix(space, full=False):
    """Broken Hessian form sum_T (D^2 y : D^2 z)_T."""
    H = space.basis_hessians()
    local = space.mesh.areas[:, None, None] * np.einsum("tide,tjde->tij", H, H)
    A = _coo(space, local)
    return A if full else _restrict(space, A)


def edge_quadrature(mesh, qdeg=EDGE_QDEG):
    """Quadrature on interior edges.

    Returns ``(edges, pts, w, lam0, lam1)``: interior edge ids, physical
    points (E, Q, 2), physical weights (E, Q), and barycentric coordinates of
    the points in the lower- and higher-index adjacent triangles.
    """
    rule = quadrature("interval", qdeg)
    edges = np.flatnonzero(mesh.interior_edges)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    pts = a[:, None] + rule.points[None, :, None] * (b - a)[:, None]
    w = mesh.edge_lengths[edges, None] * rule.weights[None]
    nq = len(rule.points)
    out = []
    for side in (0, 1):
        tri = np.repeat(mesh.edge_triangles[edges, side], nq)
        out.append(mesh.barycentric(tri, pts.reshape(-1, 2)).reshape(len(edges), nq, 3))
    return edges, pts, w, out[0], out[1]


def _edge_side_data(space, edges, lam, side):
    """Normal derivatives and normal-normal second derivatives of the local
    basis of one side; shapes (E, Q, k) and (E, k)."""
    m = space.mesh
    tri = m.edge_triangles[edges, side]
    n = m.edge_normals[edges]
    g = m.barycentric_gradients()[tri]  # (E, 3, 2)
    dl = shape_dlam(space.degree, lam)  # (E, Q, k, 3)
    grad = np.einsum("eqij,ejd->eqid", dl, g)
    dn = np.einsum("eqid,ed->eqi", grad, n)
    H = space.basis_hessians()[tri]  # (E, k, 2, 2)
    dnn = np.einsum("eiab,ea,eb->ei", H, n, n)
    return tri, dn, dnn


def edge_jump_data(space, qdeg=EDGE_QDEG):
    """Jump of the normal derivative and average of the second normal
    derivative for the 2k local DOFs of each interior edge.

    Returns ``(edges, dofs (E, 2k), w (E, Q), jump (E, Q, 2k), avg (E, 2k))``.
    """
    m = space.mesh
    edges, _, w, lam0, lam1 = edge_quadrature(m, qdeg)
    t0, dn0, dnn0 = _edge_side_data(space, edges, lam0, 0)
    t1, dn1, dnn1 = _edge_side_data(space, edges, lam1, 1)
    dofs = np.hstack([space.cell_dofs[t0], space.cell_dofs[t1]])
    jump = np.concatenate([dn0, -dn1], axis=-1)
    avg = 0.5 * np.concatenate([dnn0, dnn1], axis=-1)
    return edges, dofs, w, jump, avg


def penalty_matrices(space, full=True, qdeg=EDGE_QDEG):
    """Interior-edge matrices ``(C, P)``: consistency
    sum_e int {d2y/dn2}[dz/dn] + (y<->z), and penalty
    sum_e |e|^-1 int [dy/dn][dz/dn]."""
    m = space.mesh
    edges, dofs, w, jump, avg = edge_jump_data(space, qdeg)
    jw = np.einsum("eq,eqi->ei", w, jump)  # int [dphi_i/dn] ds
    cons = avg[:, :, None] * jw[:, None, :]
    cons = cons + cons.transpose(0, 2, 1)
    pen = np.einsum("eq,eqi,eqj->eij", w, jump, jump) / m.edge_lengths[edges, None, None]
    C = _coo(space, cons, rows=dofs)
    P = _coo(space, pen, rows=dofs)
    if full:
        return C, P
    return _restrict(space, C), _restrict(space, P)


def assemble_c0ip(space, spec, full=False):
    """Stiffness matrix of the C0 interior penalty form

        beta [ sum_T (D^2 y, D^2 z)_T - sum_e int {d2y/dn2}[dz/dn]
               - sum_e int {d2z/dn2}[dy/dn] + sigma sum_e |e|^-1 int [dy/dn][dz/dn] ]
        + (y, z)

    over interior edges, restricted to free DOFs unless ``full``.
    """
    if space.degree != 2:
        raise ValueError("C0 interior penalty assembly needs a degree-2 space")
    Hm = hessian_matrix(space, full=True)
    C, P = penalty_matrices(space, full=True)
    M = mass_matrix(space, full=True)
    A = spec.beta * (Hm - C + spec.sigma * P) + M
    # exact symmetry regardless of summation order
    A = sp.csr_matrix(0.5 * (A + A.T))
    A.sum_duplicates()
    A.sort_indices()
    return A if full else _restrict(space, A)


class MassSolver:
    """Inner mass-matrix solves by Jacobi CG."""

    def __init__(self, M, tol=INNER_TOL):
        self.M = M
        self.tol = tol
        self.diag = M.diagonal()

    def __call__(self, b):
        try:
            x, _ = pcg(self.M, b, tol=self.tol, diag=self.diag)
        except SolverError as exc:
            raise SolverError(f"inner mass solve failed: {exc}") from None
        return x


class MixedOperator(LinearOperator):
    """y -> beta K M^{-1} K y + M y on the free P1 DOFs.

    This is the matrix of beta (Lap_h y, Lap_h z) + (y, z) where the discrete
    Laplacian satisfies (Lap_h y, z) = -(grad y, grad z).
    """

    def __init__(self, space, beta, inner_tol=INNER_TOL):
        self.space = space
        self.beta = float(beta)
        self.M = mass_matrix(space)
        self.K = stiffness_matrix(space)
        self.mass_solve = MassSolver(self.M, inner_tol)
        lumped = np.asarray(self.M.sum(axis=1)).ravel()
        KL = self.K @ sp.diags(1.0 / lumped) @ self.K
        diag = self.beta * KL.diagonal() + self.M.diagonal()
        super().__init__(space.ndof, self._apply_mixed, diag, "mixed")

    def _apply_mixed(self, y):
        Ky = self.K @ y
        return self.beta * (self.K.T @ self.mass_solve(Ky)) + self.M @ y

    def laplacian(self, y):
        """Coefficients of Lap_h y."""
        return -self.mass_solve(self.K @ y)


def assemble_mixed(space, spec):
    if space.degree != 1:
        raise ValueError("mixed assembly needs a degree-1 space")
    return MixedOperator(space, spec.beta)


def assemble_operator(space, spec):
    if spec.method == "c0ip":
        return assemble_c0ip(space, spec)
    return assemble_mixed(space, spec)


def assemble_load(space, y_d, qdeg=MASS_QDEG, full=False):
    """Load vector f_i = int y_d phi_i."""
    f = as_field(y_d)
    rule = quadrature("triangle", qdeg)
    lam = np.column_stack([1 - rule.points.sum(1), rule.points])
    phi = shape_values(space.degree, lam)
    m = space.mesh
    x = m.to_reference(np.arange(m.num_triangles)[:, None], lam[None])  # (T, Q, 2)
    fv = f(x[..., 0], x[..., 1])
    local = 2.0 * m.areas[:, None] * np.einsum("q,tq,qi->ti", rule.weights, fv, phi)
    b = np.zeros(space.ndof_full)
    np.add.at(b, space.cell_dofs.ravel(), local.ravel())
    return b if full else b[space.free]


def energy_norm(space, spec, coeffs, operator=None):
    """sqrt(a_h(v, v)) for free coefficients ``v``."""
    A = assemble_operator(space, spec) if operator is None else operator
    v = np.asarray(coeffs, dtype=float)
    q = float(v @ (A @ v))
    if q < 0:
        scale = float(v @ v) * max(1.0, abs(q))
        if q < -1e-12 * max(scale, 1.0):
            raise CoercivityError(f"a_h(v, v) = {q:.3e} < 0: penalty below coercivity")
        q = 0.0
    return np.sqrt(q)


def recover_control(space, state, mass=None, stiffness=None):
    """Control coefficients u_h = -Lap_h y_h in the same space as the state.

    The discrete Laplacian is the L2 projection of the distributional
    Laplacian: (Lap_h y, v) = -(grad y, grad v) for all v in the space.
    """
    M = mass_matrix(space) if mass is None else mass
    K = stiffness_matrix(space) if stiffness is None else stiffness
    y = np.asarray(state, dtype=float)
    if not np.any(y):
        return np.zeros_like(y)
    return MassSolver(M)(K @ y)


def coercivity_check(A):
    """Positive-pivot sparse factorization; returns the pivots or raises
    :class:`NotSPDError`."""
    return Factorization(A).pivots


__all__ = [
    "ProblemSpec", "CoercivityError", "NotSPDError", "assemble_c0ip", "assemble_mixed",
    "assemble_operator", "assemble_load", "energy_norm", "recover_control",
    "mass_matrix", "stiffness_matrix", "hessian_matrix", "penalty_matrices",
    "MixedOperator", "edge_jump_data", "edge_quadrature", "coercivity_check",
]
