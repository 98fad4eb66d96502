import math

import numpy as np
import pytest

from simplexot.errors import BoundaryTooClose, InsufficientResolution, ShapeError
from simplexot.geometry import Chart, Side, chart_coords
from simplexot.metric import (
    boundary_lattice,
    build_metric_graph,
    chart_margin,
    classify_trend,
    distance,
    distance_bound_scan,
    distance_to_singular,
    envelope_violations,
    fit_quadratic,
    hessian_in_chart,
    interior_samples,
    isometry_residual,
    jensen_segments,
    quartic_isometry,
    singular_vertex_pairs,
)

FACE = Chart(Side.A, "face", 0, 1)


def test_quadratic_fit_is_exact_on_quadratics():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([0.3, -0.2])
    g = lambda x: 0.5 * np.einsum("ij,jk,ik->i", x, H, x) + x @ b + 1.0  # noqa: E731
    x0 = np.array([0.4, 0.1])
    Hf, grad = fit_quadratic(g, x0, 0.05)
    np.testing.assert_allclose(Hf, H, atol=1e-9)
    np.testing.assert_allclose(grad, H @ x0 + b, atol=1e-9)
    # one-sided fit keeps exactness
    Hs, _ = fit_quadratic(g, x0, 0.05, inside=lambda p: p[:, 0] >= x0[0])
    np.testing.assert_allclose(Hs, H, atol=1e-8)


def test_central_difference_hessian_and_psd_clipping():
    x = np.array([1.0, 1.0])
    sad = lambda p: p[:, 0] ** 2 - p[:, 1] ** 2  # noqa: E731
    res = hessian_in_chart(sad, FACE, x, h=1e-3)
    assert res.clipped and res.min_eigenvalue == pytest.approx(-2.0, abs=1e-6)
    np.testing.assert_allclose(res.matrix, [[2.0, 0.0], [0.0, 0.0]], atol=1e-6)


def test_hessian_refuses_points_near_the_domain_boundary():
    with pytest.raises(BoundaryTooClose):
        hessian_in_chart(lambda p: p[:, 0] ** 2, FACE, [0.0, 1.0], h=1e-2)


def test_chart_margin_at_face_barycenter():
    # the face chart of a triangle facet: coordinates 4(w_k - w_aux), simplex of size 4
    x = chart_coords(FACE, np.array([[0, 1 / 3, 1 / 3, 1 / 3]]))[0]
    m = chart_margin(FACE, x)
    assert 0.5 < m < 4.0
    assert chart_margin(FACE, x + 10) == 0.0


def test_quartic_isometry_second_order():
    r1, r2, r3 = (quartic_isometry(h)["max_residual"] for h in (1e-3, 5e-4, 2.5e-4))
    assert r1 <= 1e-4
    assert r1 / r2 >= 2 and r2 / r3 >= 2


def test_legendre_pair_of_quadratic_is_an_isometry():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    Ai = np.linalg.inv(A)
    f = lambda x: 0.5 * np.einsum("ij,jk,ik->i", x, A, x)  # noqa: E731
    g = lambda y: 0.5 * np.einsum("ij,jk,ik->i", y, Ai, y)  # noqa: E731
    res = isometry_residual(f, g, np.array([[0.3, 0.4], [1.0, -1.0]]), h=1e-3, gradient_scale=1.0)
    assert res["max_residual"] <= 1e-6


def test_solved_isometry_residual_decreases_with_resolution(solve):
    vals = []
    for r in (4, 8, 16):
        sol = solve(2, r)
        h = 4 * sol.mu.grid.spacing / 2
        xs = interior_samples(2, FACE, 2 * h)[:3]
        vals.append(isometry_residual(sol.phi, sol.psi, xs, chart=FACE)["max_residual"])
    assert vals[0] > vals[1] > vals[2]


def test_interior_samples_respect_margin():
    xs = interior_samples(2, FACE, 0.3)
    assert len(xs) >= 1
    assert all(chart_margin(FACE, x) >= 0.3 for x in xs)
    with pytest.raises(ShapeError):
        interior_samples(2, Chart(Side.A, "star", 0, 1), 0.1)


def test_distance_to_singular_matches_closed_form_in_d2():
    # for d = 2 the singular set is the six points with two weights 1/2
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(3), size=40)
    pts = np.hstack([np.zeros((40, 1)), w])
    sing = []
    for a in range(4):
        for b in range(a + 1, 4):
            p = np.zeros(4)
            p[[a, b]] = 0.5
            sing.append(p)
    want = np.min(np.linalg.norm(pts[:, None, :] - np.array(sing)[None], axis=2), axis=1)
    np.testing.assert_allclose(distance_to_singular(pts, step=0.01), want, atol=1e-12)


def test_graph_of_flat_metric_reproduces_chart_distance():
    # u = |x|^2 / 2 has identity Hessian: graph lengths approximate chart Euclidean length
    g = build_metric_graph(lambda x: 0.5 * (x**2).sum(axis=1), 16, chart=FACE, d=2)
    X = chart_coords(FACE, g.nodes)
    center = X.mean(axis=0)
    inner = np.flatnonzero(np.linalg.norm(X - center, axis=1) <= 0.6)
    a, b = inner[np.argmin(X[inner, 0])], inner[np.argmax(X[inner, 0])]
    want = float(np.linalg.norm(X[a] - X[b]))
    got = float(g.distances_from(a)[0, b])
    assert want <= got <= 1.08 * want


def test_solved_graph_is_connected_and_refines(solve):
    s8, s12 = solve(2, 8), solve(2, 12)
    g8 = build_metric_graph(s8.phi, 8, f_c=s8.psi)
    g12 = build_metric_graph(s12.phi, 12, f_c=s12.psi)
    assert g8.components() == 1 and g12.components() == 1
    assert g8.clipped_hessians == 0
    # distances between facet-interior points shrink (or stay) under refinement
    p, q = np.array([0, 0.5, 0.3, 0.2]), np.array([0.2, 0.3, 0.5, 0])
    assert distance(g12, p, q) <= distance(g8, p, q) * 1.05


def test_bound_scan_and_held_out_envelope(solve):
    s8, s12 = solve(2, 8), solve(2, 12)
    g8 = build_metric_graph(s8.phi, 8, f_c=s8.psi)
    scan = distance_bound_scan(g8)
    assert 0 < scan["beta"] <= 1 and scan["violations"] == 0
    assert scan["delta_K"] > 0
    g12 = build_metric_graph(s12.phi, 12, f_c=s12.psi)
    held = envelope_violations(g12, scan["C"], scan["beta"], region=g8.collar)
    assert held["violations"] == 0 and held["pairs"] > 0


def test_bound_scan_of_flat_metric_is_lipschitz():
    g = build_metric_graph(lambda x: 0.5 * (x**2).sum(axis=1), 8, chart=FACE, d=2)
    assert distance_bound_scan(g)["slope"] == pytest.approx(1.0, abs=0.03)


def test_bound_scan_needs_pairs():
    g = build_metric_graph(lambda x: 0.5 * (x**2).sum(axis=1), 2, chart=FACE, d=2)
    with pytest.raises(InsufficientResolution):
        distance_bound_scan(g)


def test_jensen_on_solved_and_analytic_potentials(solve):
    sol = solve(2, 8)
    rep = jensen_segments(sol.phi, sol.psi, n_segments=10, seed=1)
    assert rep["segments"] == 40 and rep["violations"] == 0
    conv = jensen_segments(lambda x: np.exp(x[:, 0]) + x[:, 1] ** 4, charts=[FACE], d=2, n_segments=10)
    assert conv["violations"] == 0 and conv["max_ratio"] <= 1.0


def test_singular_vertex_pairs_are_edge_endpoints():
    pairs = singular_vertex_pairs(3)
    assert len(pairs) == 30
    for pos, neg, label in pairs:
        assert sorted(pos.tolist()) == [0, 0, 0, 0.5, 0.5]
        assert np.count_nonzero(neg) == 3 and np.count_nonzero(pos) == 2
        # the positive vertex's max set lies inside the negative vertex's support
        assert set(np.flatnonzero(pos)) < set(np.flatnonzero(neg))
    assert len({p[2] for p in pairs}) == 30


def test_boundary_lattice_points():
    pts = boundary_lattice(2, 6, np.zeros(4), np.ones(4))
    assert len(pts) == len({tuple(p) for p in pts})
    np.testing.assert_allclose(pts.sum(axis=1), 1.0)
    assert np.all(pts.min(axis=1) == 0)
    # every boundary point k/6: 4 faces of a triangle with 28 points, shared edges and vertices once
    assert len(pts) == 4 * 28 - 6 * 7 + 4


def test_classify_trend():
    assert classify_trend([0.4, 0.45, 0.5]) == "bounded-below"
    assert classify_trend([0.4, 0.1, 0.05]) == "decreasing"
    assert classify_trend([0.4, 0.05, 0.1]) == "inconclusive"
    assert classify_trend([0.4, math.inf, 0.3]) == "inconclusive"
