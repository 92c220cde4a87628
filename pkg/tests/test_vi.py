import numpy as np
import pytest
import scipy.sparse as sp

from platevi.assembly import ProblemSpec
from platevi.harness import constrained_benchmarks, solve_on_mesh
from platevi.mesh import unit_square_mesh
from platevi.vi import PDASError, VIProblem, kkt_report, qp_oracle, solve_pdas


def random_qp(seed, n=None, m=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(5, 51))
    m = min(n, m or int(rng.integers(1, 16)))
    B = rng.standard_normal((n, n))
    A = B @ B.T + n * np.eye(n)
    f = rng.standard_normal(n) * 5
    idx = rng.choice(n, m, replace=False)
    psi = rng.uniform(-0.5, 0.5, m)
    return VIProblem(sp.csr_matrix(A), f, idx, psi)


def test_one_dimensional_examples():
    p = VIProblem(np.array([[2.0]]), np.array([4.0]), [0], np.array([1.0]))
    s = solve_pdas(p)
    assert s.state[0] == 1.0 and s.multiplier[0] == pytest.approx(2.0)
    p = VIProblem(np.array([[2.0]]), np.array([1.0]), [0], np.array([1.0]))
    s = solve_pdas(p)
    assert s.state[0] == pytest.approx(0.5) and s.active_count == 0 and s.iterations == 0


@pytest.mark.parametrize("seed", range(10))
def test_pdas_kkt_on_random_qps(seed):
    p = random_qp(seed)
    s = solve_pdas(p)
    k = s.kkt
    assert k.passes(1e-9), k
    # multiplier supported on the reported active set
    assert np.all(s.multiplier[~s.active] == 0)
    assert np.all(s.state[p.indices[s.active]] == p.bounds[s.active])


@pytest.mark.parametrize("seed", range(5))
def test_oracle_methods_agree(seed):
    p = random_qp(seed, n=40, m=12)
    e = qp_oracle(p)
    g = qp_oracle(p, max_enumerate=0)
    assert e.info["method"] == "enumeration" and g.info["method"] == "projected-gradient"
    assert np.abs(e.state - g.state).max() <= 1e-8
    assert e.info["passing"] == 1  # strictly convex: unique KKT point


def test_problem_validation():
    A = np.eye(3)
    with pytest.raises(ValueError):
        VIProblem(A, np.zeros(2), [0], [1.0])
    with pytest.raises(ValueError):
        VIProblem(A, np.zeros(3), [0, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        VIProblem(A, np.zeros(3), [5], [1.0])
    with pytest.raises(ValueError):
        VIProblem(A, np.zeros(3), [0], [np.inf])
    with pytest.raises(ValueError):
        VIProblem(A, np.zeros(3), [0], [1.0], c=0.0)


def test_iteration_cap_raises_with_iterate():
    p = random_qp(3, n=50, m=15)
    p.max_iter = 1
    try:
        s = solve_pdas(p)
    except PDASError as exc:
        assert exc.solution is not None and not exc.solution.converged
    else:
        assert s.iterations <= 1


def test_warm_start_same_answer():
    p = random_qp(11, n=30, m=10)
    a = solve_pdas(p)
    b = solve_pdas(p, initial_active=a.active)
    assert np.array_equal(a.active, b.active) and b.iterations == 1
    assert np.abs(a.state - b.state).max() < 1e-12
    with pytest.raises(ValueError):
        solve_pdas(p, initial_active=np.ones(3, bool))


def test_kkt_report_flags_violations():
    p = VIProblem(np.eye(2), np.array([1.0, 1.0]), [0, 1], np.array([0.5, 0.5]))
    s = solve_pdas(p)
    s.state = s.state + np.array([0.1, 0.0])
    k = kkt_report(p, s)
    assert k.feasibility == pytest.approx(0.1) and not k.passes()


def test_small_target_gives_empty_active_set():
    flat = constrained_benchmarks()[0]
    s = ProblemSpec(beta=flat.spec.beta, y_d=0.001, psi=flat.spec.psi)
    ms = solve_on_mesh(unit_square_mesh(8), s)
    assert ms.solution.active_count == 0


def test_activity_monotone_in_obstacle():
    # lowering the obstacle only grows the contact set
    m = unit_square_mesh(8)
    prev = None
    for level in (0.05, 0.02, 0.01):
        ms = solve_on_mesh(m, ProblemSpec(beta=0.1, y_d=10.0, psi=level))
        act = set(ms.active_vertices().tolist())
        if prev is not None:
            assert prev <= act
        prev = act
    assert prev
