"""End-to-end acceptance criteria. Each test records one PASS/FAIL line,
repeated in the terminal summary."""
import json
import time

import numpy as np
import scipy.sparse.linalg as spla

from platevi.assembly import (ProblemSpec, assemble_c0ip, assemble_load, assemble_operator,
                              coercivity_check, mass_matrix, recover_control, stiffness_matrix)
from platevi.cli import main
from platevi.harness import (INACTIVE_OBSTACLE, active_set_is_interior, constrained_benchmarks,
                             manufactured_unconstrained, run_study, solve_on_mesh)
from platevi.mesh import unit_square_mesh
from platevi.space import build_space
from platevi.vi import box_problem, qp_oracle, solve_pdas

from .test_vi import random_qp


def test_c1_manufactured_c0ip(record_criterion):
    t0 = time.perf_counter()
    res = run_study(manufactured_unconstrained(), method="c0ip", ns=(4, 8, 16, 32))
    dt = time.perf_counter() - t0
    r = res.rates
    ok = 0.9 <= r["energy"] <= 1.2 and r["linf"] >= 1.7 and dt <= 60
    record_criterion(1, "C0-IP manufactured rates", ok,
                     f"energy {r['energy']:.3f} in [0.9,1.2], vertex max {r['linf']:.3f} >= 1.7, {dt:.1f}s <= 60s")
    assert ok


def test_c2_manufactured_mixed(record_criterion):
    t0 = time.perf_counter()
    res = run_study(manufactured_unconstrained(), method="mixed", ns=(4, 8, 16, 32))
    dt = time.perf_counter() - t0
    r = res.rates
    ok = r["l2"] >= 1.7 and r["control"] >= 0.9 and dt <= 120
    record_criterion(2, "mixed manufactured rates", ok,
                     f"state L2 {r['l2']:.3f} >= 1.7, control L2 {r['control']:.3f} >= 0.9, {dt:.1f}s <= 120s")
    assert ok


def test_c3_oracle_equivalence(record_criterion):
    diffs = []
    for seed in range(30):
        p = random_qp(1000 + seed)
        assert p.n <= 50 and p.m <= 15
        diffs.append(np.abs(solve_pdas(p).state - qp_oracle(p).state).max())
    b1 = constrained_benchmarks()[0]
    s = build_space(unit_square_mesh(4), 2)
    A = assemble_operator(s, b1.spec)
    p = box_problem(s, A, assemble_load(s, b1.spec.y_d), b1.spec.psi)
    pd, orc = solve_pdas(p), qp_oracle(p)
    diffs.append(np.abs(pd.state - orc.state).max())
    worst = max(diffs)
    ok = worst <= 1e-8 and pd.active_count > 0
    record_criterion(3, "PDAS matches QP oracle", ok,
                     f"30 random QPs + flat obstacle n=4 ({pd.active_count} active), max diff {worst:.2e} <= 1e-8")
    assert ok


def test_c4_kkt_suite(record_criterion):
    worst = {"stationarity": 0.0, "feasibility": 0.0, "sign": 0.0, "complementarity": 0.0}
    support_ok = interior_ok = True
    for b in constrained_benchmarks():
        for n in (8, 16, 32):
            ms = solve_on_mesh(unit_square_mesh(n), b.spec)
            sol = ms.solution
            for k, v in sol.kkt.as_dict().items():
                worst[k] = max(worst[k], v)
            support_ok &= bool(np.all(sol.multiplier[~sol.active] == 0) and sol.active.any())
            interior_ok &= active_set_is_interior(ms)
    ok = (worst["feasibility"] <= 1e-10 and worst["sign"] <= 1e-12
          and worst["complementarity"] <= 1e-10 and worst["stationarity"] <= 1e-9
          and support_ok and interior_ok)
    record_criterion(4, "KKT residuals on both benchmarks", ok,
                     ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                     + f", support {support_ok}, interior {interior_ok}")
    assert ok


def test_c5_constrained_convergence(record_criterion):
    t0 = time.perf_counter()
    res = run_study(constrained_benchmarks()[0], method="c0ip", ns=(8, 16, 32), reference_factor=4)
    dt = time.perf_counter() - t0
    rate = res.rates["energy"]
    ok = res.reference_n == 128 and rate >= 0.8 and dt <= 600
    record_criterion(5, "flat obstacle energy rate vs n=128 reference", ok,
                     f"rate {rate:.3f} >= 0.8, {dt:.1f}s <= 600s")
    assert ok


def test_c6_degeneration(record_criterion):
    b1 = constrained_benchmarks()[0]
    spec = ProblemSpec(beta=b1.spec.beta, y_d=b1.spec.y_d, psi=INACTIVE_OBSTACLE)
    ms = solve_on_mesh(unit_square_mesh(16), spec)
    # independent sparse LU solve of the unconstrained system
    y_bvp = spla.spsolve(ms.operator.tocsc(), ms.load)
    d = np.abs(ms.state - y_bvp).max()
    ok = d <= 1e-9 and ms.solution.active_count == 0
    record_criterion(6, "inactive obstacle reproduces the BVP", ok, f"max diff {d:.1e} <= 1e-9")
    assert ok


def test_c7_structural(record_criterion):
    spec = ProblemSpec(beta=1.0, y_d=1.0, psi=1.0, sigma=10.0)
    sym, minpiv = 0.0, np.inf
    for n in (2, 4, 8):
        A = assemble_c0ip(build_space(unit_square_mesh(n), 2), spec)
        sym = max(sym, abs(A - A.T).max())
        minpiv = min(minpiv, coercivity_check(A).min())
    s1 = build_space(unit_square_mesh(8), 1)
    M, K = mass_matrix(s1), stiffness_matrix(s1)
    rng = np.random.default_rng(24)
    lap = 0.0
    for _ in range(20):
        y, v = rng.standard_normal((2, s1.ndof))
        lhs = -(v @ (M @ recover_control(s1, y, M, K)))
        rhs = -(v @ (K @ y))
        lap = max(lap, abs(lhs - rhs) / max(1.0, abs(rhs)))
    counts = True
    for n in (1, 2, 3, 5, 8, 16):
        m = unit_square_mesh(n)
        V, E, T = m.num_vertices, m.num_edges, m.num_triangles
        counts &= V - E + T == 1 and (V, E, T) == ((n + 1) ** 2, 3 * n * n + 2 * n, 2 * n * n)
        counts &= build_space(m, 2).ndof == (2 * n - 1) ** 2 and build_space(m, 1).ndof == (n - 1) ** 2
    ok = sym <= 1e-12 and minpiv > 0 and lap <= 1e-10 and counts
    record_criterion(7, "structural checks", ok,
                     f"asymmetry {sym:.1e}, min pivot {minpiv:.3g}, Laplacian identity {lap:.1e}, counts {counts}")
    assert ok


def test_c8_determinism(tmp_path, record_criterion):
    def run(tag):
        d = tmp_path / tag
        d.mkdir()
        cfgs = [
            {"command": "study", "benchmark": "flat-obstacle", "n": [4, 8], "output": {"csv": str(d / "s.csv")}},
            {"command": "study", "benchmark": "manufactured", "n": [4, 8, 16], "method": "mixed",
             "output": {"csv": str(d / "m.csv")}},
            {"command": "solve", "n": 16, "beta": 0.01, "y_d": 1.0, "method": "c0ip",
             "psi": {"name": "paraboloid_obstacle", "params": {"base": 0.05, "curvature": 0.5}},
             "output": {"vtk": str(d / "p.vtk"), "summary": str(d / "p.json")}},
            {"command": "export-mesh", "n": 5, "output": {"vtk": str(d / "mesh.vtk")}},
        ]
        for i, c in enumerate(cfgs):
            p = d / f"cfg{i}.json"
            p.write_text(json.dumps(c))
            assert main([str(p)]) == 0
        return {f.name: f.read_bytes() for f in sorted(d.iterdir()) if not f.name.startswith("cfg")}

    a, b = run("a"), run("b")
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    record_criterion(8, "byte-identical outputs", same, f"{len(a)} files compared")
    assert same
