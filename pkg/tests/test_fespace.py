import numpy as np
import pytest

from h2curl import analysis, fespace as fs, mesh as m, poly2d, ref_element as re
from h2curl.fields import Field

from checks import (curl_fd_defect, dof_invariance_defect, commuting_defect, curl_interp_margin, random_affine,
                    sample_points)
from conftest import poly_field, trig_field


def _grad_x2y3():
    return Field(lambda x, y: np.stack(np.broadcast_arrays(2 * x * y**3, 3 * x**2 * y**2), -1),
                 lambda x, y: np.zeros(np.broadcast(x, y).shape))


def test_h2curl_counts():
    V = fs.build_h2curl_space(m.uniform_rect_mesh(2), 3)
    assert V.n_global == 73
    # 8 boundary vertices, 8 boundary-edge midpoints, 8 boundary edges x 3 moments
    assert len(V.dofmap.boundary_dofs) == 8 + 8 + 24
    V1 = fs.build_h2curl_space(m.uniform_rect_mesh(1), 3)
    assert V1.n_global == 24 and sorted(V1.dofmap.cell_dofs[0]) == list(range(24))


def test_h1_counts():
    assert fs.build_h1_space(m.uniform_rect_mesh(2), 3).n_global == 49
    assert fs.build_h1_space(m.uniform_tri_mesh(1), 4).n_global == 25
    for N in (1, 3, 6):
        S = fs.build_h1_space(m.uniform_rect_mesh(N), 1)
        assert S.n_global == (N + 1) ** 2
        assert len(S.dofmap.boundary_dofs) == 4 * N


def test_h1_nodes_are_distinct():
    for S in (fs.build_h1_space(m.uniform_rect_mesh(3), 3), fs.build_h1_space(m.graded_lshape_mesh(1, 0.245), 4)):
        x = fs.h1_node_coordinates(S)
        assert len(np.unique(np.round(x, 12), axis=0)) == S.n_global


def test_space_order_checks():
    with pytest.raises(re.OrderTooLowError):
        fs.build_h2curl_space(m.uniform_tri_mesh(2), 3)


def test_push_basis_examples(rng):
    el = re.build_rect_element(3)
    pts = rng.uniform(-1, 1, size=(5, 2))
    vals, curls, ccs = el.tabulate(pts)
    pb = fs.push_basis(el, m.AffineMap(np.eye(2), np.zeros(2), 1.0), pts)
    assert np.allclose(pb.values[0], vals) and np.allclose(pb.curls[0], curls) and np.allclose(pb.curlcurls[0], ccs)
    pb = fs.push_basis(el, m.AffineMap(2 * np.eye(2), np.zeros(2), 4.0), pts)
    assert np.allclose(pb.values[0], vals / 2)
    assert np.allclose(pb.curls[0], curls / 4)
    assert np.allclose(pb.curlcurls[0], 2 * ccs / 16)
    with pytest.raises(m.SingularMapError):
        fs.push_basis(el, m.AffineMap(np.zeros((2, 2)), np.zeros(2), 0.0), pts)


def test_tangent():
    a = m.AffineMap(np.diag([2.0, 0.5]), np.zeros(2), 1.0)
    assert np.allclose(fs.tangent(a, [1.0, 1.0]), np.array([2.0, 0.5]) / np.hypot(2.0, 0.5))


@pytest.mark.parametrize("shape,k", [("rect", 3), ("tri", 4)])
def test_curl_transformation_fd(shape, k, rng):
    el = re.build_element(shape, k)
    for _ in range(5):
        amap = random_affine(rng, shape)
        assert curl_fd_defect(el, amap, rng.normal(size=el.ndofs), sample_points(rng, shape, 10)) < 1e-6


def test_curlcurl_transformation_fd(rng):
    # curl of the pushed curl matches the pushed curl-curl
    el = re.build_tri_element(4)
    amap = random_affine(rng, "tri")
    c = rng.normal(size=el.ndofs)
    X = amap(sample_points(rng, "tri", 10))
    h = 1e-5

    def curl_at(P):
        return fs.push_basis(el, amap, amap.inverse(P)).curls[0] @ c

    grad = np.stack([(curl_at(X + [h, 0]) - curl_at(X - [h, 0])) / (2 * h),
                     (curl_at(X + [0, h]) - curl_at(X - [0, h])) / (2 * h)], -1)
    vector_curl = np.stack([grad[:, 1], -grad[:, 0]], -1)
    cc = np.einsum("pjc,j->pc", fs.push_basis(el, amap, amap.inverse(X)).curlcurls[0], c)
    assert np.abs(vector_curl - cc).max() < 1e-6 * np.abs(cc).max()


@pytest.mark.parametrize("shape,k", [("rect", 3), ("rect", 4), ("tri", 4), ("tri", 5)])
def test_dof_invariance_under_affine_maps(shape, k, rng):
    el = re.build_element(shape, k)
    for _ in range(20):
        assert dof_invariance_defect(el, random_affine(rng, shape), trig_field(rng)) < 1e-8


@pytest.mark.parametrize("shape,k", [("rect", 3), ("tri", 4)])
def test_commuting_interpolation(shape, k, rng):
    el = re.build_element(shape, k)
    for _ in range(5):
        amap = random_affine(rng, shape)
        assert commuting_defect(el, amap, trig_field(rng), sample_points(rng, shape, 20)) < 1e-8


@pytest.mark.parametrize("shape,k", [("rect", 3), ("tri", 4)])
def test_curl_interpolation_inequality_lowest_order(shape, k, rng):
    for _ in range(10):
        assert curl_interp_margin(shape, k, trig_field(rng)) <= 1e-9


def test_interpolation_reproduces_gradient_field(rng):
    u = _grad_x2y3()
    for g in (m.uniform_rect_mesh(3),):
        V = fs.build_h2curl_space(g, 3)
        uh = fs.interpolate(V, u)
        pts = rng.uniform(-1, 1, size=(10, 2))
        v, c, _ = uh.evaluate(pts)
        X = V.map_points(pts)
        assert np.abs(v - u.value(X[..., 0], X[..., 1])).max() < 1e-9
        assert np.abs(c).max() < 1e-9


@pytest.mark.parametrize("shape,k", [("rect", 3), ("tri", 4)])
def test_interpolation_reproduces_local_space_on_one_cell(shape, k, rng):
    from checks import single_cell_mesh
    V = fs.build_h2curl_space(single_cell_mesh(shape), k)
    amap = V.cell_map(0)
    el = V.element
    c = rng.normal(size=el.ndofs)
    # a pushed reference member is a member of the physical local space
    from checks import pushed_basis_field
    fields = [pushed_basis_field(el, amap, j) for j in range(el.ndofs)]
    u = Field(lambda x, y: sum(ci * f.value(x, y) for ci, f in zip(c, fields)),
              lambda x, y: sum(ci * f.curl(x, y) for ci, f in zip(c, fields)))
    uh = fs.interpolate(V, u)
    pts = sample_points(rng, shape, 20)
    v, _, _ = uh.evaluate(pts)
    X = V.map_points(pts)[0]
    assert np.abs(v[0] - u.value(X[:, 0], X[:, 1])).max() < 1e-9 * max(1, np.abs(v).max())


@pytest.mark.parametrize("N", [1, 3])
def test_linear_rotation_reproduced(N, rng):
    rot = poly_field(poly2d.VecPoly2D(-poly2d.Y, poly2d.X))
    for V in (fs.build_h2curl_space(m.uniform_rect_mesh(N), 3), fs.build_h2curl_space(m.uniform_tri_mesh(N), 4)):
        uh = fs.interpolate(V, rot)
        for cell in range(V.mesh.n_cells):
            xh = sample_points(rng, V.shape, 1)[0]
            v, c, cc = fs.eval_fe(uh, cell, xh)
            x = V.cell_map(cell)(xh)
            assert np.allclose(v, [-x[1], x[0]], atol=1e-10)
            assert c == pytest.approx(2.0, abs=1e-9)
            assert np.allclose(cc, 0, atol=1e-8)


def test_eval_fe_zero():
    V = fs.build_h2curl_space(m.uniform_rect_mesh(2), 3)
    v, c, cc = fs.eval_fe(V.zero(), 3, [0.1, 0.2])
    assert np.all(v == 0) and c == 0 and np.all(cc == 0)


def test_eval_fe_example1_at_center():
    ex = analysis.manufactured_example1()
    errs = []
    for N in (8, 16):
        V = fs.build_h2curl_space(m.uniform_rect_mesh(N), 3)
        uh = fs.interpolate(V, ex.u)
        # (0.3, 0.4) sampled from the cell that contains it
        i, j = int(0.3 * N), int(0.4 * N)
        xh = [2 * (0.3 * N - i) - 1, 2 * (0.4 * N - j) - 1]
        v, _, _ = fs.eval_fe(uh, j * N + i, xh)
        errs.append(np.abs(v - ex.u.value(np.array(0.3), np.array(0.4))).max())
    assert errs[1] < errs[0] / 4


def test_fe_function_length_checked():
    V = fs.build_h2curl_space(m.uniform_rect_mesh(1), 3)
    with pytest.raises(ValueError):
        fs.FeFunction(V, np.zeros(3))


def test_lagrange_interp_curl_examples(rng):
    for S in (fs.build_h1_space(m.uniform_rect_mesh(3), 2), fs.build_h1_space(m.uniform_tri_mesh(3), 3)):
        const = fs.lagrange_interp_curl(S, lambda x, y: np.full(np.shape(x), 2.5))
        v, _ = const.evaluate(sample_points(rng, S.shape, 5))
        assert np.allclose(v, 2.5)
        w = (lambda x, y: 1 + x * y - 2 * x**2 * y**2) if S.shape == "rect" else (lambda x, y: x**3 - x * y**2 + y)
        wh = fs.lagrange_interp_curl(S, w)
        assert analysis.scalar_l2_error(wh, w) < 1e-12
    with pytest.raises(fs.SpaceMismatchError):
        fs.lagrange_interp_curl(fs.build_h2curl_space(m.uniform_rect_mesh(1), 3), w)


def test_lagrange_nodes_match_curl_nodes():
    el = re.build_rect_element(4)
    lag = fs.build_lagrange_element("rect", 3)
    curl_pts = np.array([d.point for d in el.dofs if d.kind == re.NODE_CURL])
    bnd = np.array([n for n, e in zip(lag.nodes, lag.entities) if e[0] != "cell"])
    assert sorted(map(tuple, np.round(curl_pts, 12))) == sorted(map(tuple, np.round(bnd, 12)))


def test_lagrange_rate_for_curl_of_example1():
    ex = analysis.manufactured_example1()
    errs = [analysis.scalar_l2_error(fs.lagrange_interp_curl(fs.build_h1_space(m.uniform_rect_mesh(N), 2), ex.u.curl),
                                     ex.u.curl) for N in (8, 16, 32)]
    assert analysis.rates(errs, [1 / 8, 1 / 16, 1 / 32])[-1] == pytest.approx(3.0, abs=0.15)


@pytest.mark.parametrize("make,k", [(lambda: m.uniform_rect_mesh(4), 3), (lambda: m.uniform_tri_mesh(4), 4),
                                    (lambda: m.graded_lshape_mesh(1, 0.245), 4)])
def test_conformity(make, k):
    jt, jc = fs.conformity_jumps(fs.build_h2curl_space(make(), k))
    assert jt < 1e-9 and jc < 1e-9


def test_shared_dofs_agree():
    g = m.uniform_tri_mesh(2)
    V = fs.build_h2curl_space(g, 5)
    nV, nE = g.n_vertices, g.n_edges
    dm = V.dofmap
    counts = np.bincount(dm.cell_dofs.ravel(), minlength=V.n_global)
    # interior DOFs appear once, shared edge DOFs twice
    assert np.all(counts[nV + nE * (5 - 2) + nE * 5:] == 1)
    assert set(np.unique(counts)) <= set(range(1, 7))


@pytest.mark.parametrize("make,k", [(lambda: m.uniform_rect_mesh(3), 3), (lambda: m.uniform_tri_mesh(3), 4),
                                    (lambda: m.graded_lshape_mesh(1, 0.245), 4)])
def test_gradient_inclusion(make, k, rng):
    g = make()
    V = fs.build_h2curl_space(g, k)
    S = fs.build_h1_space(g, k)
    q = np.zeros(S.n_global)
    q[S.dofmap.free_dofs] = rng.normal(size=len(S.dofmap.free_dofs))
    qh = fs.FeFunction(S, q)
    gh = fs.gradient_interpolant(V, qh)
    pts = sample_points(rng, V.shape, 15)
    v, c, _ = gh.evaluate(pts)
    _, grad = qh.evaluate(pts)
    scale = np.abs(grad).max()
    assert np.abs(v - grad).max() < 1e-9 * scale
    assert np.abs(c).max() < 1e-9 * scale
    # the gradient of an S_h^0 function lies in V_h^0
    assert np.abs(gh.coeffs[V.dofmap.boundary_dofs]).max() < 1e-9 * scale


def test_interpolation_rate_rect():
    ex = analysis.manufactured_example1()
    Ns = (8, 16, 32)
    reps = [analysis.error_norms(fs.interpolate(fs.build_h2curl_space(m.uniform_rect_mesh(N), 3), ex.u), ex.u)
            for N in Ns]
    hs = [1 / N for N in Ns]
    assert analysis.rates([r.curl for r in reps], hs)[-1] == pytest.approx(3.0, abs=0.15)
    assert analysis.rates([r.curlcurl for r in reps], hs)[-1] == pytest.approx(2.0, abs=0.15)
