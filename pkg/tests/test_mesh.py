import io

import numpy as np
import pytest

from h2curl import mesh as m


def test_uniform_rect_counts():
    g = m.uniform_rect_mesh(2)
    assert (g.n_vertices, g.n_cells, g.n_edges) == (9, 4, 12)
    g = m.uniform_rect_mesh(40)
    assert (g.n_vertices, g.n_cells, g.n_edges) == (1681, 1600, 2 * 40 * 41)
    assert g.h() == pytest.approx(1 / 40)


def test_uniform_tri_counts():
    g = m.uniform_tri_mesh(2)
    assert (g.n_vertices, g.n_cells, g.n_edges) == (9, 8, 16)
    g = m.uniform_tri_mesh(1)
    assert g.n_cells == 2 and (~g.boundary_edges).sum() == 1
    assert m.uniform_tri_mesh(10).n_cells == 200
    assert m.uniform_tri_mesh(7).n_edges == 3 * 49 + 14


def test_affine_map_examples():
    a = m.affine_map(m.uniform_rect_mesh(1), 0)
    assert np.allclose(a.B, np.diag([0.5, 0.5])) and np.allclose(a.b, [0.5, 0.5])
    assert a.det_B == pytest.approx(0.25)
    ref = m.build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], m.TRI)
    a = m.affine_map(ref, 0)
    assert np.allclose(a.B, np.eye(2)) and np.allclose(a.b, 0)
    h = 0.3
    a = m.affine_map(m.build_mesh([[0, 0], [h, 0], [0, h]], [[0, 1, 2]], m.TRI), 0)
    assert a.det_B == pytest.approx(h * h)


def test_affine_map_sends_vertices_in_order():
    for g, ref in ((m.uniform_rect_mesh(3), [[-1, -1], [1, -1], [1, 1], [-1, 1]]),
                   (m.graded_lshape_mesh(2, 0.245), [[0, 0], [1, 0], [0, 1]])):
        for c in range(g.n_cells):
            a = m.affine_map(g, c)
            assert np.allclose(a(np.array(ref, float)), g.vertices[g.cells[c]])
            assert np.allclose(a.inverse(g.vertices[g.cells[c]]), ref)


def test_degenerate_cell_rejected():
    g = m.build_mesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]], m.TRI)
    with pytest.raises(m.SingularMapError):
        m.affine_map(g, 0)
    with pytest.raises(IndexError):
        m.affine_map(m.uniform_rect_mesh(1), 1)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8, 16, 33, 64])
def test_audit_uniform(N):
    assert m.audit(m.uniform_rect_mesh(N)) == []
    assert m.audit(m.uniform_tri_mesh(N)) == []


@pytest.mark.parametrize("n", range(0, 6))
@pytest.mark.parametrize("kappa", [0.5, 0.245])
def test_audit_lshape(n, kappa):
    g = m.graded_lshape_mesh(n, kappa)
    assert m.audit(g) == []
    assert g.n_cells == 6 * 4**n
    assert np.sum(g.signed_areas()) == pytest.approx(0.75)


def test_audit_detects_problems():
    g = m.uniform_tri_mesh(2)
    flipped = m.build_mesh(g.vertices, g.cells[:, ::-1], m.TRI)
    assert "non-positive cell orientation" in m.audit(flipped)
    # a hanging node: split one triangle of a pair without touching its neighbour
    V = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
    cells = [[0, 1, 4], [1, 2, 4], [0, 2, 3]]
    assert "hanging node" in m.audit(m.build_mesh(V, cells, m.TRI))


def test_bad_kappa():
    for kappa in (0.0, -0.1, 0.51, 1.0):
        with pytest.raises(ValueError):
            m.graded_lshape_mesh(1, kappa)
    with pytest.raises(ValueError):
        m.graded_lshape_mesh(-1, 0.3)


def test_cells_quadruple():
    assert m.graded_lshape_mesh(2, 0.5).n_cells == 4 * m.graded_lshape_mesh(1, 0.5).n_cells


@pytest.mark.parametrize("kappa", [0.245, 0.3, 0.5])
def test_corner_edges_shrink_geometrically(kappa):
    corner = np.array(m.LSHAPE_CORNER)
    init = m.lshape_initial_mesh()
    L0 = {}
    for a, b in init.edges:
        for p, q in ((a, b), (b, a)):
            if np.allclose(init.vertices[p], corner):
                L0[tuple(np.round((init.vertices[q] - corner) / np.linalg.norm(init.vertices[q] - corner), 12))] = \
                    np.linalg.norm(init.vertices[q] - corner)
    for n in range(1, 5):
        g = m.graded_lshape_mesh(n, kappa)
        found = 0
        for a, b in g.edges:
            for p, q in ((a, b), (b, a)):
                if np.allclose(g.vertices[p], corner):
                    d = g.vertices[q] - corner
                    L = np.linalg.norm(d)
                    assert L == pytest.approx(kappa**n * L0[tuple(np.round(d / L, 12))], rel=1e-12)
                    found += 1
        assert found == len(L0)


def _canonical(g):
    pts = g.vertices[g.cells]
    return sorted(tuple(sorted(map(tuple, np.round(c, 12)))) for c in pts)


def test_half_kappa_is_uniform_refinement():
    # plain midpoint 4-way refinement of level 1 with the corner placed far away
    level1 = m.graded_lshape_mesh(1, 0.5)
    uniform = m.refine_graded(level1, 0.3, corner=(10.0, 10.0))
    assert _canonical(uniform) == _canonical(m.graded_lshape_mesh(2, 0.5))


@pytest.mark.parametrize("kappa", [0.5, 0.245])
def test_nested(kappa):
    for n in range(0, 4):
        c, f = m.graded_lshape_mesh(n, kappa), m.graded_lshape_mesh(n + 1, kappa)
        assert np.array_equal(f.vertices[: c.n_vertices], c.vertices)
        assert len(f.parent) == f.n_cells and f.parent.max() == c.n_cells - 1
        # every child lies inside its parent
        for cell in range(f.n_cells):
            a = m.affine_map(c, int(f.parent[cell]))
            xh = a.inverse(f.vertices[f.cells[cell]])
            assert np.all(xh >= -1e-12) and np.all(xh.sum(1) <= 1 + 1e-12)


def test_edge_orientation_and_signs():
    g = m.uniform_tri_mesh(3)
    assert np.all(g.edges[:, 0] < g.edges[:, 1])
    for c in range(g.n_cells):
        for le, (i, j) in enumerate(g.local_edges):
            a, b = g.cells[c, i], g.cells[c, j]
            e = g.cell_edges[c, le]
            assert set(g.edges[e]) == {a, b}
            assert g.cell_edge_signs[c, le] == (1 if a < b else -1)


def test_boundary_flags():
    g = m.uniform_rect_mesh(3)
    on = np.isclose(g.vertices, 0).any(1) | np.isclose(g.vertices, 1).any(1)
    assert np.array_equal(g.boundary_vertices, on)
    assert g.boundary_edges.sum() == 12


def test_dump():
    buf = io.StringIO()
    m.uniform_tri_mesh(1).dump(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "v 0 0"
    assert sum(1 for s in lines if s.startswith("v ")) == 4
    assert [s for s in lines if s.startswith("c ")] == ["c 0 1 3", "c 0 3 2"]
