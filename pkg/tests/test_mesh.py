import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platevi.mesh import edge_trace_frame, polygon_area, refine, uniform_refine, unit_square_mesh


@pytest.mark.parametrize("n", [1, 2, 3, 8])
def test_counts_and_euler(n):
    m = unit_square_mesh(n)
    V, E, T = m.num_vertices, m.num_edges, m.num_triangles
    assert (V, E, T) == ((n + 1) ** 2, 3 * n * n + 2 * n, 2 * n * n)
    assert V - E + T == 1
    assert m.boundary_edges.sum() == 4 * n
    assert m.boundary_vertices.sum() == 4 * n


def test_areas_positive_and_sum():
    m = unit_square_mesh(5)
    assert np.all(m.areas > 0)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-14)
    assert m.h == pytest.approx(np.sqrt(2) / 5)


def test_edges_sorted_and_oriented():
    m = unit_square_mesh(4)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    et = m.edge_triangles
    assert np.all(et[m.interior_edges, 0] < et[m.interior_edges, 1])
    # normal points away from the centroid of the first triangle
    c0 = m.vertices[m.triangles[et[:, 0]]].mean(1)
    mid = m.vertices[m.edges].mean(1)
    assert np.all(np.einsum("ed,ed->e", mid - c0, m.edge_normals) > 0)
    assert np.allclose(np.linalg.norm(m.edge_normals, axis=1), 1.0)


def test_triangle_edges_opposite():
    m = unit_square_mesh(3)
    for t in range(m.num_triangles):
        for k in range(3):
            e = m.edges[m.triangle_edges[t, k]]
            assert m.triangles[t, k] not in e


def test_refinement_nested():
    m = unit_square_mesh(2)
    f = uniform_refine(m)
    assert f.parent is m and f.num_triangles == 4 * m.num_triangles
    assert np.array_equal(f.vertices[: m.num_vertices], m.vertices)
    assert np.allclose(f.vertices[m.num_vertices:], m.vertices[m.edges].mean(1))
    assert np.allclose(np.bincount(f.parent_triangle, f.areas), m.areas)
    ff = refine(m, 2)
    assert ff.ancestors() == [ff.parent, m]
    assert ff.h == pytest.approx(m.h / 4)


def test_refined_matches_direct_counts():
    f = refine(unit_square_mesh(2), 2)
    d = unit_square_mesh(8)
    assert (f.num_vertices, f.num_edges, f.num_triangles) == (d.num_vertices, d.num_edges, d.num_triangles)
    assert f.areas.sum() == pytest.approx(1.0)


def test_edge_frame():
    m = unit_square_mesh(2)
    e = int(np.flatnonzero(m.interior_edges)[0])
    fr = edge_trace_frame(m, e)
    assert not fr.boundary and len(fr.triangles) == 2
    assert abs(fr.normal @ fr.tangent) < 1e-15
    b = int(np.flatnonzero(m.boundary_edges)[0])
    assert edge_trace_frame(m, b).boundary


def test_polygon_area():
    assert polygon_area([[0, 0], [1, 0], [1, 1], [0, 1]]) == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_barycentric_roundtrip(n, x, y):
    m = unit_square_mesh(n)
    lam = m.barycentric(np.arange(m.num_triangles), np.tile([x, y], (m.num_triangles, 1)))
    inside = np.flatnonzero(lam.min(1) >= -1e-12)
    assert len(inside) >= 1
    assert np.allclose(lam.sum(1), 1.0)
    assert np.allclose(m.to_reference(inside, lam[inside]), [x, y])
