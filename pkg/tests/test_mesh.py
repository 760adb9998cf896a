import math

import numpy as np
import pytest

from cgl_dg.mesh import BOUNDARY, build_unit_square


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_counts_and_areas(n):
    m = build_unit_square(n)
    assert m.num_elements == 2 * n * n
    assert m.vertices.shape[0] == (n + 1) ** 2
    assert np.all(m.areas > 0)
    np.testing.assert_allclose(m.areas, 1.0 / (2 * n * n), rtol=0, atol=1e-15)
    assert abs(m.areas.sum() - 1.0) < 1e-12


def test_smallest_grid():
    m = build_unit_square(1)
    assert m.num_elements == 2
    assert m.vertices.shape[0] == 4
    assert m.num_edges == 5
    assert m.interior_edges.size == 1


@pytest.mark.parametrize("n,h", [(6, 0.235702), (12, 0.117851), (24, 0.0589256)])
def test_mesh_size_matches_tabulated(n, h):
    m = build_unit_square(n)
    assert m.h == pytest.approx(math.sqrt(2) / n, abs=1e-15)
    assert m.h == pytest.approx(h, abs=5e-7)


def test_n24_element_count():
    assert build_unit_square(24).num_elements == 1152


def test_rejects_zero():
    with pytest.raises(ValueError):
        build_unit_square(0)
    with pytest.raises(ValueError):
        build_unit_square(2.5)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_edge_sharing(n):
    m = build_unit_square(n)
    count = np.zeros(m.num_edges, int)
    local = [(1, 2), (2, 0), (0, 1)]
    lookup = {tuple(sorted(ev)): e for e, ev in enumerate(m.edge_vertices.tolist())}
    for tri in m.elements:
        for a, b in local:
            count[lookup[tuple(sorted((tri[a], tri[b])))]] += 1
    interior = m.edge_elements[:, 1] != BOUNDARY
    assert np.all(count[interior] == 2)
    assert np.all(count[~interior] == 1)


@pytest.mark.parametrize("n", [2, 4])
def test_edge_geometry_invariants(n):
    m = build_unit_square(n)
    np.testing.assert_allclose(np.linalg.norm(m.normals, axis=1), 1.0, atol=1e-14)
    d = m.vertices[m.edge_vertices[:, 1]] - m.vertices[m.edge_vertices[:, 0]]
    np.testing.assert_allclose(m.lengths, np.hypot(d[:, 0], d[:, 1]), atol=1e-15)
    allowed = np.array([1.0 / n, math.sqrt(2) / n])
    assert np.all(np.min(np.abs(m.lengths[:, None] - allowed[None]), axis=1) < 1e-14)
    assert abs(m.lengths[m.boundary_edges].sum() - 4.0) < 1e-12


def _outward_normal(m, k, e):
    """Outward normal of element k on edge e, from the element geometry alone."""
    p = m.vertices[m.elements[k]]
    a, b = m.vertices[m.edge_vertices[e]]
    t = b - a
    nrm = np.array([t[1], -t[0]]) / np.linalg.norm(t)
    opposite = [v for v in p if not (np.allclose(v, a) or np.allclose(v, b))][0]
    return nrm if np.dot(nrm, a - opposite) > 0 else -nrm


def test_interior_normals_orientation():
    m = build_unit_square(3)
    for e in m.interior_edges:
        left, right = m.edge_elements[e]
        np.testing.assert_allclose(m.normals[e], _outward_normal(m, left, e), atol=1e-14)
        np.testing.assert_allclose(m.normals[e], -_outward_normal(m, right, e), atol=1e-14)


def test_boundary_normals_point_out():
    m = build_unit_square(3)
    for e in m.boundary_edges:
        mid = m.vertices[m.edge_vertices[e]].mean(axis=0)
        inside = mid - 1e-3 * m.normals[e]
        outside = mid + 1e-3 * m.normals[e]
        assert np.all((inside > 0) & (inside < 1))
        assert np.any((outside < 0) | (outside > 1))


def test_edge_geometry_lookup():
    m = build_unit_square(2)
    bottom = [e for e in m.boundary_edges if np.all(m.vertices[m.edge_vertices[e], 1] == 0.0)]
    normal, h, (left, right) = m.edge_geometry(bottom[0])
    np.testing.assert_allclose(normal, [0.0, -1.0], atol=1e-15)
    assert right == BOUNDARY

    vertical = [e for e in m.interior_edges
                if np.ptp(m.vertices[m.edge_vertices[e], 0]) == 0.0]
    assert m.edge_geometry(vertical[0])[1] == pytest.approx(0.5, abs=1e-15)

    with pytest.raises(IndexError):
        m.edge_geometry(m.num_edges)


def test_unit_cell_diagonal():
    m = build_unit_square(1)
    (e,) = m.interior_edges
    assert m.edge_geometry(e)[1] == pytest.approx(math.sqrt(2), abs=1e-15)


def test_refinement_quadruples():
    for n in (1, 2, 5):
        assert build_unit_square(2 * n).num_elements == 4 * build_unit_square(n).num_elements


def test_immutable_and_dump(tmp_path):
    m = build_unit_square(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0
    path = tmp_path / "mesh.txt"
    m.dump(path)
    lines = path.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 9
    assert sum(l.startswith("t ") for l in lines) == 8
