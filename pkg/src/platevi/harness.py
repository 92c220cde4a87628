"""Benchmarks, error measurement and convergence studies."""
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .assembly import (ProblemSpec, assemble_load, assemble_operator, edge_quadrature,
                       energy_norm, mass_matrix, recover_control, stiffness_matrix, _edge_side_data)
from .fields import Constant, ManufacturedRhs, Paraboloid, SinSin
from .linalg import SolverError
from .mesh import refine, uniform_refine, unit_square_mesh
from .quadrature import quadrature
from .space import build_space, prolong, shape_values
from .vi import box_problem, solve_pdas

log = logging.getLogger(__name__)

INACTIVE_OBSTACLE = 1e6
ERROR_QDEG = 6


@dataclass
class Benchmark:
    """A problem instance with optional closed-form state and control.

    ``alpha_expected`` is the expected energy-norm rate, ``gamma_expected``
    the observed lower-order (vertex max-norm) rate.
    """

    name: str
    spec: ProblemSpec
    exact_state: object = None
    exact_control: object = None
    alpha_expected: float = 1.0
    gamma_expected: float = None
    n_values: tuple = ()

    @property
    def has_exact(self):
        return self.exact_state is not None

    def with_method(self, method):
        if method is None or method == self.spec.method:
            return self
        return replace(self, spec=replace(self.spec, method=method))

    def strong_residual(self, x, y):
        """beta lap^2 y + y - y_d for the exact state."""
        if not self.has_exact:
            raise ValueError(f"benchmark {self.name!r} has no exact state")
        s = self.spec
        return s.beta * self.exact_state.bilaplacian(x, y) + self.exact_state(x, y) - s.y_d(x, y)


def manufactured_unconstrained(beta=1.0):
    """sin(pi x) sin(pi y) as optimal state with an obstacle that never binds."""
    spec = ProblemSpec(beta=beta, y_d=ManufacturedRhs(beta), psi=Constant(INACTIVE_OBSTACLE))
    return Benchmark("manufactured", spec, exact_state=SinSin(1.0),
                     exact_control=SinSin(2.0 * np.pi**2), alpha_expected=1.0,
                     gamma_expected=2.0, n_values=(4, 8, 16, 32))


def constrained_benchmarks():
    flat = Benchmark("flat-obstacle",
                     ProblemSpec(beta=0.1, y_d=Constant(10.0), psi=Constant(0.01)),
                     alpha_expected=1.0, n_values=(8, 16, 32))
    para = Benchmark("paraboloid",
                     ProblemSpec(beta=0.01, y_d=Constant(1.0),
                                 psi=Paraboloid(base=0.05, curvature=0.5, cx=0.5, cy=0.5)),
                     alpha_expected=1.0, n_values=(8, 16, 32))
    return [flat, para]


def get_benchmark(name):
    for b in [manufactured_unconstrained(), *constrained_benchmarks()]:
        if b.name == name:
            return b
    raise ValueError(f"unknown benchmark {name!r}")


@dataclass
class MeshSolve:
    """Discretization and solution of one problem on one mesh."""

    mesh: object
    space: object
    spec: ProblemSpec
    operator: object
    load: np.ndarray
    problem: object
    solution: object
    control: np.ndarray
    seconds: float
    _mats: dict = field(default_factory=dict, repr=False)

    @property
    def state(self):
        return self.solution.state

    def mass(self):
        if "M" not in self._mats:
            self._mats["M"] = mass_matrix(self.space)
        return self._mats["M"]

    def stiffness(self):
        if "K" not in self._mats:
            self._mats["K"] = stiffness_matrix(self.space)
        return self._mats["K"]

    def active_vertices(self):
        """Mesh vertex indices where the constraint is active."""
        interior = np.flatnonzero(self.space.vertex_dof_map >= 0)
        return interior[self.solution.active]


def solve_on_mesh(mesh, spec, pdas=None, warm=None):
    """Assemble and solve the discrete obstacle problem on ``mesh``.

    ``warm`` is an optional solution on the parent mesh whose active set
    seeds the active-set iteration.
    """
    spec.check_obstacle(mesh)
    t0 = time.perf_counter()
    space = build_space(mesh, spec.degree)
    A = assemble_operator(space, spec)
    f = assemble_load(space, spec.y_d)
    problem = box_problem(space, A, f, spec.psi, **(pdas or {}))
    sol = solve_pdas(problem, None if warm is None else _inherited_active(warm, space, problem))
    if spec.method == "mixed":
        control = recover_control(space, sol.state, A.M, A.K)
        ms = MeshSolve(mesh, space, spec, A, f, problem, sol, control, 0.0)
        ms._mats.update(M=A.M, K=A.K)
    else:
        ms = MeshSolve(mesh, space, spec, A, f, problem, sol, None, 0.0)
        ms.control = recover_control(space, sol.state, ms.mass(), ms.stiffness())
    ms.seconds = time.perf_counter() - t0
    return ms


def _inherited_active(coarse, space, problem):
    """Active mask on a once-refined mesh: coarse active vertices, midpoints
    of edges with both ends active, and vertices where the prolonged coarse
    state violates the bound."""
    mesh = space.mesh
    if mesh.parent is not coarse.mesh:
        raise ValueError("warm start must come from the parent mesh")
    cm = coarse.mesh
    on = np.zeros(mesh.num_vertices, dtype=bool)
    on[coarse.active_vertices()] = True
    both = on[cm.edges[:, 0]] & on[cm.edges[:, 1]]
    on[cm.num_vertices:] = both
    y = prolong(coarse.space, space, coarse.state)
    interior = np.flatnonzero(space.vertex_dof_map >= 0)
    return on[interior] | (y[problem.indices] > problem.bounds)


def solve_nested(mesh, levels, spec, pdas=None):
    """Solve on ``mesh`` and on ``levels`` successive uniform refinements,
    seeding each level with the active set of the previous one."""
    ms = solve_on_mesh(mesh, spec, pdas)
    for _ in range(levels):
        ms = solve_on_mesh(uniform_refine(ms.mesh), spec, pdas, warm=ms)
    return ms


@dataclass
class ErrorRow:
    energy: float
    h1: float
    l2: float
    linf: float
    control: float


def _volume_points(mesh):
    rule = quadrature("triangle", ERROR_QDEG)
    lam = np.column_stack([1 - rule.points.sum(1), rule.points])
    x = mesh.to_reference(np.arange(mesh.num_triangles)[:, None], lam[None])
    w = 2.0 * mesh.areas[:, None] * rule.weights[None]
    return lam, x, w


def _fe_derivs(space, coeffs, lam):
    """Values (T, Q), gradients (T, Q, 2) and Hessians (T, 2, 2) of a FE
    function at reference points ``lam``."""
    u = space.to_full(coeffs)[space.cell_dofs]  # (T, k)
    val = np.einsum("qi,ti->tq", shape_values(space.degree, lam), u)
    grad = np.einsum("tqid,ti->tqd", space.basis_gradients(lam), u)
    hess = np.einsum("tiab,ti->tab", space.basis_hessians(), u)
    return val, grad, hess


def _exact_errors(bench, ms):
    s, spec, mesh = ms.space, ms.spec, ms.mesh
    ex = bench.exact_state
    lam, x, w = _volume_points(mesh)
    X, Y = x[..., 0], x[..., 1]
    val, grad, hess = _fe_derivs(s, ms.state, lam)
    e0 = ex(X, Y) - val
    e1 = ex.gradient(X, Y) - grad
    l2sq = float(np.sum(w * e0**2))
    h1sq = float(np.sum(w * np.sum(e1**2, -1)))

    if spec.method == "c0ip":
        e2 = ex.hessian(X, Y) - hess[:, None]
        vol = float(np.sum(w * np.sum(e2**2, axis=(-1, -2))))
        edges, pts, ew, lam0, lam1 = edge_quadrature(mesh)
        u = s.to_full(ms.state)
        t0, dn0, dnn0 = _edge_side_data(s, edges, lam0, 0)
        t1, dn1, dnn1 = _edge_side_data(s, edges, lam1, 1)
        jump_h = np.einsum("eqi,ei->eq", dn0, u[s.cell_dofs[t0]]) - \
            np.einsum("eqi,ei->eq", dn1, u[s.cell_dofs[t1]])
        avg_h = 0.5 * (np.einsum("ei,ei->e", dnn0, u[s.cell_dofs[t0]])
                       + np.einsum("ei,ei->e", dnn1, u[s.cell_dofs[t1]]))
        n = mesh.edge_normals[edges]
        Hx = ex.hessian(pts[..., 0], pts[..., 1])
        avg_ex = np.einsum("eqab,ea,eb->eq", Hx, n, n)
        # the exact state has no normal-derivative jumps
        jump_e = -jump_h
        avg_e = avg_ex - avg_h[:, None]
        cons = float(np.sum(ew * avg_e * jump_e))
        pen = float(np.sum(ew * jump_e**2 / mesh.edge_lengths[edges, None]))
        esq = spec.beta * (vol - 2.0 * cons + spec.sigma * pen) + l2sq
    else:
        # discrete Laplacian of the state is -u_h, a function in the same space
        uval, _, _ = _fe_derivs(s, ms.control, lam)
        lap_err = ex.laplacian(X, Y) + uval
        esq = spec.beta * float(np.sum(w * lap_err**2)) + l2sq

    ctrl = float("nan")
    if bench.exact_control is not None:
        uval, _, _ = _fe_derivs(s, ms.control, lam)
        ctrl = math.sqrt(float(np.sum(w * (bench.exact_control(X, Y) - uval) ** 2)))
    vx = mesh.vertices
    linf = float(np.abs(ex(vx[:, 0], vx[:, 1]) - s.vertex_values(ms.state)).max())
    return ErrorRow(math.sqrt(max(esq, 0.0)), math.sqrt(h1sq), math.sqrt(l2sq), linf, ctrl)


def _reference_errors(coarse, ref):
    d = ref.state - prolong(coarse.space, ref.space, coarse.state)
    energy = energy_norm(ref.space, ref.spec, d, operator=ref.operator)
    h1 = math.sqrt(max(float(d @ (ref.stiffness() @ d)), 0.0))
    l2 = math.sqrt(max(float(d @ (ref.mass() @ d)), 0.0))
    nv = coarse.mesh.num_vertices
    linf = float(np.abs(ref.space.vertex_values(ref.state)[:nv]
                        - coarse.space.vertex_values(coarse.state)).max())
    du = ref.control - prolong(coarse.space, ref.space, coarse.control)
    ctrl = math.sqrt(max(float(du @ (ref.mass() @ du)), 0.0))
    return ErrorRow(float(energy), h1, l2, linf, ctrl)


def compute_errors(bench, coarse, reference=None):
    """Errors of ``coarse`` against the exact solution (``reference=None``)
    or a solution on a nested refinement of the coarse mesh."""
    if reference is None:
        return _exact_errors(bench, coarse)
    if reference.spec.method != coarse.spec.method:
        raise ValueError("reference and coarse solutions use different methods")
    if reference.mesh is not coarse.mesh and coarse.mesh not in reference.mesh.ancestors():
        raise ValueError("reference mesh is not a nested refinement of the coarse mesh")
    return _reference_errors(coarse, reference)


def fit_rate(h, err):
    """Least-squares slope of log(err) against log(h)."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) < 2 or np.any(err <= 0) or not np.all(np.isfinite(err)):
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class StudyRow:
    n: int
    h: float
    ndof: int
    err_energy: float
    err_h1: float
    err_linf: float
    err_l2: float
    err_control: float
    pdas_iters: int
    solve_seconds: float
    active_count: int


RATE_COLUMNS = ("energy", "h1", "linf", "l2", "control")


@dataclass
class StudyResult:
    benchmark: str
    method: str
    rows: list
    reference_n: int = None
    fit_last: int = 3

    @property
    def rates(self):
        tail = self.rows[-self.fit_last:]
        h = [r.h for r in tail]
        return {k: fit_rate(h, [getattr(r, f"err_{k}") for r in tail]) for k in RATE_COLUMNS}


class StudyError(SolverError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def default_threads():
    env = os.environ.get("PLATE_VI_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _mesh_sequence(ns):
    ns = [int(n) for n in ns]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError(f"mesh sequence must be strictly increasing, got {ns}")
    meshes = {ns[0]: unit_square_mesh(ns[0])}
    for a, b in zip(ns, ns[1:]):
        ratio = b // a
        if b % a or ratio & (ratio - 1):
            raise ValueError(f"nested studies need power-of-two ratios, got {a} -> {b}")
        meshes[b] = refine(meshes[a], int(math.log2(ratio)))
    return meshes


def run_study(bench, method=None, ns=None, threads=None, reference_factor=4, pdas=None):
    """Convergence study over the mesh sequence ``ns``.

    Benchmarks with an exact state are measured against it; otherwise every
    mesh is compared with the solution on a ``reference_factor`` times finer
    nested refinement of the finest mesh.
    """
    bench = bench.with_method(method)
    ns = tuple(bench.n_values if ns is None else ns)
    threads = default_threads() if threads is None else max(1, int(threads))
    result = StudyResult(bench.name, bench.spec.method, [])

    reference = None
    if bench.has_exact:
        meshes = {n: unit_square_mesh(n) for n in sorted(set(ns))}
        if list(meshes) != list(ns):
            raise ValueError(f"mesh sequence must be strictly increasing, got {list(ns)}")
    else:
        meshes = _mesh_sequence(ns)
        k = int(math.log2(reference_factor))
        if 2**k != reference_factor:
            raise ValueError("reference_factor must be a power of two")
        result.reference_n = ns[-1] * reference_factor
        try:
            reference = solve_nested(meshes[ns[-1]], k, bench.spec, pdas)
        except SolverError as exc:
            raise StudyError(f"reference solve failed: {exc}", result) from exc

    def cell(n):
        ms = solve_on_mesh(meshes[n], bench.spec, pdas)
        err = compute_errors(bench, ms, reference)
        return StudyRow(n, ms.mesh.h, ms.space.ndof, err.energy, err.h1, err.linf, err.l2,
                        err.control, ms.solution.iterations, ms.seconds, ms.solution.active_count)

    with ThreadPoolExecutor(max_workers=min(threads, len(ns))) as pool:
        futures = {n: pool.submit(cell, n) for n in ns}
    for n in ns:
        try:
            result.rows.append(futures[n].result())
        except SolverError as exc:
            raise StudyError(f"solve on n={n} failed: {exc}", result) from exc
        log.info("%s/%s n=%d energy=%.3e", bench.name, result.method, n, result.rows[-1].err_energy)
    return result


def vertex_adjacency(mesh):
    e = mesh.edges
    nv = mesh.num_vertices
    A = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(nv, nv))
    return (A + A.T).tocsr()


def active_set_is_interior(ms):
    """True when no active vertex lies on the boundary or shares an edge with
    a boundary vertex."""
    act = ms.active_vertices()
    if len(act) == 0:
        return True
    bv = ms.mesh.boundary_vertices
    adj = vertex_adjacency(ms.mesh)
    touching = adj[act] @ bv.astype(float)
    return not (bv[act].any() or np.any(touching > 0))


def active_components(ms):
    """Number of edge-connected components of the active vertex set."""
    act = ms.active_vertices()
    if len(act) == 0:
        return 0
    sub = vertex_adjacency(ms.mesh)[act][:, act]
    return int(connected_components(sub, directed=False)[0])
