"""Symmetric positive definite solves.

Explicit sparse matrices go through a sparse LDL^T-style factorization
(SuperLU with diagonal pivoting in symmetric mode), which also doubles as
the positive-pivot coercivity check. Matrix-free operators go through
Jacobi-preconditioned conjugate gradients.
"""
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-10
INNER_TOL = 1e-12


class SolverError(RuntimeError):
    pass


class NotSPDError(SolverError):
    """Raised on nonpositive curvature or a nonpositive pivot."""


class ConvergenceError(SolverError):
    pass


@dataclass
class SolveReport:
    iterations: int
    residual: float
    seconds: float
    method: str

    @property
    def factorized(self):
        return self.method == "direct"


class LinearOperator:
    """Symmetric operator known through its action.

    ``diagonal`` is an SPD approximation of the true diagonal used for
    Jacobi preconditioning; it need not be exact.
    """

    def __init__(self, n, apply, diagonal=None, tag="operator"):
        self.shape = (n, n)
        self._apply = apply
        self.diagonal = diagonal
        self.tag = tag

    @property
    def n(self):
        return self.shape[0]

    def __matmul__(self, v):
        return self._apply(np.asarray(v, dtype=float))

    def apply(self, v):
        return self @ v

    def dense(self):
        """Dense matrix obtained by applying to unit vectors."""
        return np.column_stack([self @ e for e in np.eye(self.n)])


def _diag(A):
    if sp.issparse(A):
        return A.diagonal()
    if isinstance(A, LinearOperator):
        return A.diagonal
    return np.diag(A)


def pcg(A, b, tol=DEFAULT_TOL, x0=None, maxiter=None, diag=None, callback=None):
    """Jacobi-preconditioned CG; returns ``(x, iterations)``.

    Convergence is tested on the true residual before returning, so the
    reported relative residual can be trusted.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), 0
    maxiter = 10 * max(n, 1) if maxiter is None else maxiter
    if diag is None:
        diag = _diag(A)
    inv_d = None if diag is None else 1.0 / np.asarray(diag, dtype=float)
    if inv_d is not None and np.any(~np.isfinite(inv_d) | (inv_d <= 0)):
        raise NotSPDError("Jacobi preconditioner has a nonpositive diagonal entry")

    it = 0
    target = tol * bnorm
    while True:
        r = b - A @ x
        if np.linalg.norm(r) <= target:
            return x, it
        z = r if inv_d is None else inv_d * r
        p = z.copy()
        rz = r @ z
        while it < maxiter:
            q = A @ p
            curv = p @ q
            if curv <= 0.0:
                raise NotSPDError(f"operator not SPD: curvature {curv:.3e} at iteration {it}")
            alpha = rz / curv
            x += alpha * p
            r -= alpha * q
            it += 1
            if callback is not None:
                callback(x)
            if np.linalg.norm(r) <= target:
                break
            z = r if inv_d is None else inv_d * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        else:
            raise ConvergenceError(
                f"CG did not reach relative residual {tol:g} in {maxiter} iterations "
                f"(residual {np.linalg.norm(b - A @ x) / bnorm:.3e})")


class Factorization:
    """Sparse factorization of an SPD matrix with positive-pivot check."""

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] == 0:
            self.lu = None
            return
        try:
            self.lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise NotSPDError(f"factorization failed: {exc}") from None
        pivots = self.lu.U.diagonal()
        if np.any(self.lu.perm_r != self.lu.perm_c):
            raise NotSPDError("factorization left the diagonal; matrix is not SPD")
        if np.any(pivots <= 0.0):
            raise NotSPDError(f"nonpositive pivot {pivots.min():.3e}; matrix is not SPD")
        self.pivots = pivots

    def solve(self, b):
        if self.lu is None:
            return np.zeros(0)
        return self.lu.solve(np.asarray(b, dtype=float))


def _relres(A, x, b):
    bn = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / bn if bn > 0 else r


def solve_spd(A, b, tol=DEFAULT_TOL, method="auto"):
    """Solve ``A x = b`` for SPD ``A``; returns ``(x, SolveReport)``.

    ``method`` is ``"direct"``, ``"cg"`` or ``"auto"`` (direct for explicit
    sparse matrices, CG for operators).
    """
    if not 0.0 < tol <= 1e-4:
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    if not np.any(b):
        return np.zeros_like(b), SolveReport(0, 0.0, time.perf_counter() - t0, "trivial")
    if method == "auto":
        method = "direct" if (sp.issparse(A) or isinstance(A, np.ndarray)) else "cg"
    if method == "direct":
        x = Factorization(A).solve(b)
        its = 0
    elif method == "cg":
        x, its = pcg(A, b, tol=tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = _relres(A, x, b)
    if method == "direct" and res > max(tol, attainable_residual(A, x, b)):
        raise SolverError(f"direct solve residual {res:.3e} above tolerance {tol:g}")
    return x, SolveReport(its, res, time.perf_counter() - t0, method)


def attainable_residual(A, x, b):
    """Relative residual floor of a backward-stable solve in double precision,
    ``16 eps || |A| |x| || / ||b||``; fourth-order systems reach it well before
    the requested tolerance on fine meshes."""
    if not sp.issparse(A) and not isinstance(A, np.ndarray):
        return 0.0
    absA = abs(A)
    return 16 * np.finfo(float).eps * np.linalg.norm(absA @ np.abs(x)) / max(np.linalg.norm(b), 1e-300)


class _Restricted(LinearOperator):
    def __init__(self, A, free):
        n = A.shape[0]
        self.A, self.free_idx, self.full_n = A, free, n

        def apply(v):
            w = np.zeros(n)
            w[free] = v
            return (A @ w)[free]

        d = _diag(A)
        super().__init__(len(free), apply, None if d is None else np.asarray(d)[free], "restricted")


def solve_constrained(A, b, fixed, tol=DEFAULT_TOL, method="auto"):
    """Solve ``A x = b`` on the free indices with ``x[i] = fixed[i]`` held.

    ``fixed`` maps index to value (a dict, or a pair of arrays). Explicit
    matrices are reduced by symmetric elimination; operators are solved by
    CG on the free subspace.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if isinstance(fixed, dict):
        idx = np.fromiter(fixed.keys(), dtype=np.int64, count=len(fixed))
        vals = np.fromiter(fixed.values(), dtype=float, count=len(fixed))
    else:
        idx, vals = (np.asarray(a) for a in fixed)
        idx = idx.astype(np.int64)
        vals = vals.astype(float)
    order = np.argsort(idx, kind="stable")
    idx, vals = idx[order], vals[order]
    t0 = time.perf_counter()
    x = np.zeros(n)
    x[idx] = vals
    mask = np.ones(n, dtype=bool)
    mask[idx] = False
    free = np.flatnonzero(mask)
    if len(free) == 0:
        return x, SolveReport(0, 0.0, time.perf_counter() - t0, "trivial")
    if len(idx) == 0:
        return solve_spd(A, b, tol=tol, method=method)

    rhs = b - A @ x
    if method == "auto":
        method = "direct" if (sp.issparse(A) or isinstance(A, np.ndarray)) else "cg"
    if method == "direct":
        Aff = sp.csr_matrix(A)[free][:, free]
        xf, rep = solve_spd(Aff, rhs[free], tol=tol, method="direct")
    else:
        op = _Restricted(A, free)
        xf, rep = solve_spd(op, rhs[free], tol=tol, method="cg")
    x[free] = xf
    rep.seconds = time.perf_counter() - t0
    return x, rep
