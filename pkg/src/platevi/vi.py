"""Box-constrained quadratic programs from the discrete obstacle problem.

Find y minimizing 1/2 y^T A y - f^T y subject to y[i] <= psi_i for the
constrained indices i (the interior mesh vertices). Multipliers follow the
usual QP sign convention: lambda >= 0 and

    A y - f + B^T lambda = 0,

with B the vertex-extraction map. The continuous multiplier measure of the
control problem is nonpositive; it corresponds to -lambda.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import DEFAULT_TOL, LinearOperator, SolverError, solve_constrained, solve_spd

log = logging.getLogger(__name__)

FEAS_TOL = 1e-10
SIGN_TOL = 1e-12
COMPL_TOL = 1e-10
ORACLE_MAX_DOFS = 300
ORACLE_MAX_ENUM = 15


class PDASError(SolverError):
    """Active-set iteration failed; ``solution`` holds the last iterate."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass
class VIProblem:
    operator: object
    load: np.ndarray
    indices: np.ndarray
    bounds: np.ndarray
    c: float = 1.0
    max_iter: int = 50
    tol: float = 1e-9
    solve_tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.load = np.asarray(self.load, dtype=float)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.bounds = np.asarray(self.bounds, dtype=float)
        n = len(self.load)
        if self.operator.shape != (n, n):
            raise ValueError(f"operator shape {self.operator.shape} does not match load of size {n}")
        if self.indices.shape != self.bounds.shape:
            raise ValueError("indices and bounds must have equal length")
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("constraint indices must be distinct")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise ValueError("constraint index out of range")
        if not np.all(np.isfinite(self.bounds)):
            raise ValueError("constraint bounds must be finite")
        if not self.c > 0:
            raise ValueError(f"PDAS shift constant must be positive, got {self.c}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def n(self):
        return len(self.load)

    @property
    def m(self):
        return len(self.indices)


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    feasibility: float
    sign: float
    complementarity: float

    def passes(self, stationarity_tol=1e-9):
        return (self.stationarity <= stationarity_tol and self.feasibility <= FEAS_TOL
                and self.sign <= SIGN_TOL and self.complementarity <= COMPL_TOL)

    def as_dict(self):
        return {"stationarity": self.stationarity, "feasibility": self.feasibility,
                "sign": self.sign, "complementarity": self.complementarity}


@dataclass
class Solution:
    state: np.ndarray
    multiplier: np.ndarray
    active: np.ndarray
    iterations: int
    kkt: KKTReport
    converged: bool = True
    history: list = field(default_factory=list)
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def active_count(self):
        return int(np.count_nonzero(self.active))


def kkt_report(problem, solution):
    """Max-norm KKT residuals of ``solution``.

    Feasibility is the largest violation of y <= psi, sign the largest
    negative multiplier, complementarity max |lambda (y - psi)|.
    """
    y = np.asarray(solution.state, dtype=float)
    lam = np.asarray(solution.multiplier, dtype=float)
    g = problem.operator @ y - problem.load
    np.add.at(g, problem.indices, lam)
    gap = y[problem.indices] - problem.bounds
    return KKTReport(
        stationarity=float(np.abs(g).max()) if len(g) else 0.0,
        feasibility=float(max(0.0, gap.max())) if len(gap) else 0.0,
        sign=float(max(0.0, (-lam).max())) if len(lam) else 0.0,
        complementarity=float(np.abs(lam * gap).max()) if len(gap) else 0.0,
    )


def _stationarity_floor(A, y, f):
    # rounding floor of A y - f, entrywise 16 eps (|A||y| + |f|)
    if isinstance(A, LinearOperator):
        return 0.0
    return 16 * np.finfo(float).eps * float(np.max(abs(A) @ np.abs(y) + np.abs(f), initial=0.0))


def solve_pdas(problem, initial_active=None):
    """Primal-dual active set iteration.

    Starts from the unconstrained minimizer with the violated vertices
    active (or from ``initial_active``, a boolean mask over the constraints),
    then alternates an equality-constrained solve (y = psi on the active
    set), the multiplier update lambda = (f - A y) on the active set, and the
    new active set {i : lambda_i + c (y_i - psi_i) > 0} until the set repeats.
    """
    p = problem
    A, f, idx, psi = p.operator, p.load, p.indices, p.bounds
    t0 = time.perf_counter()
    lam = np.zeros(p.m)
    if initial_active is None:
        y, _ = solve_spd(A, f, tol=p.solve_tol)
        active = y[idx] > psi
    else:
        active = np.array(initial_active, dtype=bool)
        if active.shape != (p.m,):
            raise ValueError("initial_active must be a mask over the constraints")
        if not active.any():
            y, _ = solve_spd(A, f, tol=p.solve_tol)
            active = y[idx] > psi
    history = [int(active.sum())]
    it = 0
    while active.any():
        it += 1
        y, _ = solve_constrained(A, f, (idx[active], psi[active]), tol=p.solve_tol)
        lam = np.zeros(p.m)
        lam[active] = (f - A @ y)[idx[active]]
        new = lam + p.c * (y[idx] - psi) > 0
        if np.array_equal(new, active):
            break
        if it >= p.max_iter:
            sol = _with_kkt(p, Solution(y, lam, active, it, None, False, history,
                                        time.perf_counter() - t0))
            raise PDASError(f"PDAS did not settle in {p.max_iter} iterations "
                            f"(recent active set sizes {history[-5:]})", sol)
        active = new
        history.append(int(active.sum()))

    sol = _with_kkt(p, Solution(y, lam, active, it, None, True, history, time.perf_counter() - t0))
    stol = max(p.tol, _stationarity_floor(A, y, f))
    if not sol.kkt.passes(stol):
        sol.converged = False
        raise PDASError(f"active set settled but KKT check failed: {sol.kkt}", sol)
    log.debug("PDAS converged in %d iterations, %d active", it, sol.active_count)
    return sol


def _with_kkt(problem, sol):
    sol.kkt = kkt_report(problem, sol)
    return sol


def _dense(A):
    if sp.issparse(A):
        return A.toarray()
    if isinstance(A, LinearOperator):
        D = A.dense()
        return 0.5 * (D + D.T)
    return np.asarray(A, dtype=float)


def qp_oracle(problem, max_enumerate=ORACLE_MAX_ENUM):
    """Reference minimizer of the same QP by dense linear algebra.

    With at most ``max_enumerate`` constraints every candidate active set is
    tried (each one an equality-constrained solve through the Schur
    complement of A^{-1}) and the one satisfying the KKT conditions is kept.
    Larger instances use projected gradient descent whose identified active
    set is polished by an exact equality-constrained solve.
    """
    p = problem
    if p.n > ORACLE_MAX_DOFS:
        raise ValueError(f"qp_oracle handles at most {ORACLE_MAX_DOFS} DOFs, got {p.n}")
    t0 = time.perf_counter()
    A = _dense(p.operator)
    if p.m <= max_enumerate:
        y, active, info = _enumerate(A, p.load, p.indices, p.bounds)
    else:
        y, active, info = _projected_gradient(A, p.load, p.indices, p.bounds)
    lam = np.zeros(p.m)
    r = p.load - A @ y
    lam[active] = r[p.indices[active]]
    sol = Solution(y, lam, active, info.get("iterations", 0), None, True, [], 0.0, info)
    sol = _with_kkt(p, sol)
    sol.seconds = time.perf_counter() - t0
    return sol


def _kkt_tols(A, f, psi):
    scale = max(1.0, np.abs(A).max()) * max(1.0, np.abs(psi).max(initial=0.0), np.abs(f).max(initial=0.0))
    return 1e-10 * scale


def _enumerate(A, f, idx, psi):
    m = len(idx)
    Ainv = np.linalg.inv(A)
    Ainv = 0.5 * (Ainv + Ainv.T)
    y0 = Ainv @ f
    tol = _kkt_tols(A, f, psi)
    gap0 = y0[idx] - psi
    G = Ainv[np.ix_(idx, idx)]
    found = None
    checked = passing = 0
    for k in range(m + 1):
        combos = list(itertools.combinations(range(m), k))
        S = np.array(combos, dtype=np.int64).reshape(len(combos), k)
        checked += len(S)
        if k == 0:
            lamS = np.zeros((1, 0))
        else:
            lamS = np.linalg.solve(G[S[:, :, None], S[:, None, :]], gap0[S][..., None])[..., 0]
        # vertex values y[idx] = y0[idx] - G[:, S] lam_S
        yv = y0[idx][None] - np.einsum("nik,nk->ni", G[:, S].transpose(1, 0, 2), lamS)
        inS = np.zeros((len(S), m), dtype=bool)
        if k:
            np.put_along_axis(inS, S, True, axis=1)
        ok_lam = np.all(lamS >= -tol, axis=1)
        ok_feas = np.all(np.where(inS, True, yv <= psi[None] + tol), axis=1)
        good = np.flatnonzero(ok_lam & ok_feas)
        passing += len(good)
        if found is None and len(good):
            j = good[0]
            lam_full = np.zeros(m)
            lam_full[S[j]] = lamS[j]
            found = (inS[j].copy(), lam_full)
    if found is None:
        raise SolverError("active-set enumeration found no KKT point")
    active, lam = found
    y = y0 - Ainv[:, idx] @ lam
    y[idx[active]] = psi[active]
    return y, active, {"method": "enumeration", "candidates": checked, "passing": passing}


def _equality_solve(A, f, idx, psi, active):
    n = len(f)
    fixed = idx[active]
    free = np.setdiff1d(np.arange(n), fixed)
    y = np.zeros(n)
    y[fixed] = psi[active]
    if len(free):
        rhs = f[free] - A[np.ix_(free, fixed)] @ y[fixed]
        y[free] = np.linalg.solve(A[np.ix_(free, free)], rhs)
    return y


def _projected_gradient(A, f, idx, psi, max_iter=200_000):
    n = len(f)
    L = float(np.linalg.eigvalsh(A)[-1])
    tol = _kkt_tols(A, f, psi)
    ub = np.full(n, np.inf)
    ub[idx] = psi
    y = np.minimum(np.linalg.solve(A, f), ub)
    z, tk = y.copy(), 1.0
    delta = 1e-2 * max(1.0, np.abs(psi).max())
    for it in range(1, max_iter + 1):
        y_new = np.minimum(z - (A @ z - f) / L, ub)
        tk1 = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
        z = y_new + ((tk - 1) / tk1) * (y_new - y)
        if (A @ y_new - f) @ (y_new - y) > 0:  # adaptive restart
            z, tk1 = y_new.copy(), 1.0
        y, tk = y_new, tk1
        if it % 200 == 0:
            active = y[idx] >= psi - delta
            yc = _equality_solve(A, f, idx, psi, active)
            lam = (f - A @ yc)[idx]
            if np.all(lam[active] >= -tol) and np.all(yc[idx][~active] <= psi[~active] + tol):
                return yc, active, {"method": "projected-gradient", "iterations": it}
            delta *= 0.5
    raise SolverError(f"projected gradient oracle did not converge in {max_iter} iterations")


def box_problem(space, operator, load, psi, **params):
    """VIProblem with y <= psi imposed at the interior vertices of the mesh."""
    interior = np.flatnonzero(space.vertex_dof_map >= 0)
    idx = space.vertex_dof_map[interior]
    xy = space.mesh.vertices[interior]
    bounds = np.asarray(psi(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(len(idx))
    return VIProblem(operator, load, idx, bounds, **params)
