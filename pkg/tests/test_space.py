import numpy as np
import pytest

from platevi.mesh import refine, uniform_refine, unit_square_mesh
from platevi.space import (build_space, eval_basis, evaluate, inject, interpolate_nodal,
                           prolong, prolongation)


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_dof_counts(n):
    m = unit_square_mesh(n)
    p1, p2 = build_space(m, 1), build_space(m, 2)
    assert p1.ndof == (n - 1) ** 2
    assert p2.ndof_full == m.num_vertices + m.num_edges == (2 * n + 1) ** 2
    assert p2.ndof == (2 * n - 1) ** 2
    assert p2.nloc == 6 and p1.nloc == 3


def test_unsupported_degree():
    with pytest.raises(ValueError):
        build_space(unit_square_mesh(2), 3)


@pytest.mark.parametrize("degree", [1, 2])
def test_partition_of_unity_and_nodal(degree):
    s = build_space(unit_square_mesh(2), degree)
    t = 3
    v, g, _ = eval_basis(s, t, s.mesh.vertices[s.mesh.triangles[t]].mean(0))
    assert v.sum() == pytest.approx(1.0)
    assert np.allclose(g.sum(0), 0.0)
    for k, node in enumerate(s.nodes[s.cell_dofs[t]]):
        v, _, _ = eval_basis(s, t, node)
        assert np.allclose(v, np.eye(s.nloc)[k], atol=1e-14)


def test_eval_outside_raises():
    s = build_space(unit_square_mesh(2), 2)
    with pytest.raises(ValueError):
        eval_basis(s, 0, [0.9, 0.1])


def test_p2_reproduces_quadratics():
    s = build_space(unit_square_mesh(3), 2)
    rng = np.random.default_rng(0)
    tri = rng.integers(0, s.mesh.num_triangles, 20)
    lam = rng.dirichlet(np.ones(3), 20)
    x = s.mesh.to_reference(tri, lam)
    q = lambda x, y: x * (1 - x) + 0.3 * x * y  # noqa: E731
    u = np.asarray(q(s.nodes[:, 0], s.nodes[:, 1]), float)
    assert np.allclose(evaluate(s, u, tri, lam, full=True), q(x[:, 0], x[:, 1]), atol=1e-14)
    _, _, H = eval_basis(s, 0, s.mesh.vertices[s.mesh.triangles[0]].mean(0))
    hess = np.einsum("i,iab->ab", u[s.cell_dofs[0]], H)
    assert np.allclose(hess, [[-2, 0.3], [0.3, 0]], atol=1e-12)


@pytest.mark.parametrize("degree", [1, 2])
def test_prolongation_exact_and_injection(degree):
    c = build_space(unit_square_mesh(2), degree)
    fm = refine(c.mesh, 2)
    f = build_space(fm, degree)
    rng = np.random.default_rng(1)
    uc = rng.standard_normal(c.ndof)
    uf = prolong(c, f, uc)
    tri = rng.integers(0, fm.num_triangles, 30)
    lam = rng.dirichlet(np.ones(3), 30)
    ctri = fm.parent_triangle[tri]
    ctri = fm.parent.parent_triangle[ctri]
    x = fm.to_reference(tri, lam)
    clam = c.mesh.barycentric(ctri, x)
    assert np.allclose(evaluate(f, uf, tri, lam), evaluate(c, uc, ctri, clam), atol=1e-13)
    assert np.allclose(inject(c, f, uf), uc, atol=1e-14)
    P = prolongation(c, f)
    assert P.shape == (f.ndof_full, c.ndof_full)


def test_prolongation_rejects_unrelated():
    with pytest.raises(ValueError):
        prolongation(build_space(unit_square_mesh(2), 2), build_space(unit_square_mesh(4), 2))
    m = unit_square_mesh(2)
    with pytest.raises(ValueError):
        prolongation(build_space(m, 1), build_space(uniform_refine(m), 2))


def test_interpolate_nodal_constant_field():
    s = build_space(unit_square_mesh(3), 2)
    u = interpolate_nodal(s, lambda x, y: 2.0)
    assert u.shape == (s.ndof,) and np.all(u == 2.0)
