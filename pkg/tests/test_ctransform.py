from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplexot.ctransform import (
    SampledPotential,
    argmax_sets,
    c_gradient_map,
    c_transform,
    c_transform_at,
    chart_c_gradient,
    chart_function,
    chart_potential,
    exact_potential,
    project_c_convex,
    radial_projection,
)
from simplexot.errors import ChartSideMismatch, NotInImage, ShapeError
from simplexot.geometry import Chart, Side, SimplexPoint, chart_to_plane, point_pairing
from simplexot.grid import Grid

GRIDS = {(d, r): Grid.build(d, r) for d, r in [(1, 3), (1, 6), (2, 2), (2, 4), (3, 2)]}


def exact_values(draw, n):
    return draw(st.lists(st.fractions(-3, 3, max_denominator=12), min_size=n, max_size=n))


def brute_transform(f: SampledPotential, targets: Grid):
    """Direct double loop over points in exact arithmetic."""
    out = []
    for t in targets.points():
        out.append(max(point_pairing(f.grid.point(k), t) - f.values[k] for k in range(len(f.grid))))
    return out


@settings(max_examples=15)
@given(st.sampled_from(sorted(GRIDS)), st.data())
def test_exact_transform_matches_double_loop(key, data):
    g = GRIDS[key]
    f = exact_potential(g, exact_values(data.draw, len(g)))
    assert list(c_transform(f, g.mirror()).values) == brute_transform(f, g.mirror())


@given(st.sampled_from(sorted(GRIDS)), st.data())
def test_triple_transform_is_single(key, data):
    g = GRIDS[key]
    f = exact_potential(g, exact_values(data.draw, len(g)))
    fc = c_transform(f, g.mirror())
    fccc = c_transform(c_transform(fc, g), g.mirror())
    assert list(fccc.values) == list(fc.values)


@given(st.sampled_from(sorted(GRIDS)), st.data())
def test_double_transform_is_below_and_idempotent(key, data):
    g = GRIDS[key]
    f = exact_potential(g, exact_values(data.draw, len(g)))
    fcc = project_c_convex(f)
    assert all(a <= b for a, b in zip(fcc.values, f.values))
    assert list(project_c_convex(fcc).values) == list(fcc.values)


@given(st.sampled_from(sorted(GRIDS)), st.data(), st.fractions(-5, 5, max_denominator=7))
def test_shift_rule(key, data, shift):
    g = GRIDS[key]
    f = exact_potential(g, exact_values(data.draw, len(g)))
    lhs = c_transform(f + shift, g.mirror()).values
    rhs = c_transform(f, g.mirror()).values - shift
    assert list(lhs) == list(rhs)


@pytest.mark.parametrize("key", sorted(GRIDS))
def test_zero_transform_is_one(key):
    g = GRIDS[key]
    zero = exact_potential(g, [0] * len(g))
    assert set(c_transform(zero, g.mirror()).values) == {Fraction(1)}
    floats = c_transform(SampledPotential(g, np.zeros(len(g))), g.mirror()).values
    assert np.max(np.abs(floats - 1.0)) <= 1e-12


def test_float_and_exact_agree():
    g = GRIDS[(2, 4)]
    rng = np.random.default_rng(3)
    vals = [Fraction(int(v), 97) for v in rng.integers(-50, 50, len(g))]
    ex = c_transform(exact_potential(g, vals), g.mirror()).values.astype(float)
    fl = c_transform(SampledPotential(g, np.array(vals, dtype=float)), g.mirror()).values
    np.testing.assert_allclose(ex, fl, atol=1e-13)


def test_transform_rejects_same_side():
    g = GRIDS[(1, 3)]
    with pytest.raises(ShapeError):
        c_transform(SampledPotential(g, np.zeros(len(g))), g)


def test_argmax_contains_the_maximizer():
    g = GRIDS[(2, 4)]
    rng = np.random.default_rng(0)
    f = SampledPotential(g, rng.normal(size=len(g)))
    fc = c_transform(f, g.mirror())
    fcc = c_transform(fc, g)
    sets = argmax_sets(fcc, fc, margin=0.0)
    for k, s in enumerate(sets):
        assert len(s) >= 1
        c = 1 - 4 * g.mirror().bary[s] @ g.bary[k]
        np.testing.assert_allclose(c - fc.values[s], fcc.values[k], atol=1e-12)


def test_radial_projection_lands_on_boundary_and_fixes_it():
    rng = np.random.default_rng(1)
    w = rng.dirichlet(np.ones(5), size=50)
    p = radial_projection(w)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    np.testing.assert_allclose(p.min(axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(radial_projection(p), p, atol=1e-15)


def test_zero_potential_gradient_is_the_antipodal_stratum():
    # phi = 0 has phi^c = 1 and every target with beta_k = 0 where alpha_k is maximal ties
    g = GRIDS[(1, 6)]
    zero = SampledPotential(g, np.zeros(len(g)))
    fc = c_transform(zero, g.mirror())
    gm = c_gradient_map(zero, fc)
    vertex = g.index_of(SimplexPoint.vertex(Side.A, 1, 0))
    assert np.all(g.mirror().bary[gm.sets[vertex]][:, 0] == 0)


def test_chart_function_is_convex_for_c_convex_potentials():
    g = GRIDS[(2, 4)]
    rng = np.random.default_rng(5)
    f = project_c_convex(SampledPotential(g, rng.normal(size=len(g))))
    fc = c_transform(f, g.mirror())
    for c in (Chart(Side.A, "face", 0, 1), Chart(Side.A, "star", 0, 1)):
        u = chart_function(fc, c)
        x, _, _ = chart_potential(f, c)
        a = x[rng.integers(0, len(x), 200)]
        b = x[rng.integers(0, len(x), 200)]
        mid = u(0.5 * (a + b))
        assert np.all(mid <= 0.5 * (u(a) + u(b)) + 1e-12)


def test_chart_function_agrees_with_samples():
    g = GRIDS[(2, 4)]
    rng = np.random.default_rng(6)
    f = project_c_convex(SampledPotential(g, rng.normal(size=len(g))))
    fc = c_transform(f, g.mirror())
    for c in (Chart(Side.A, "face", 1, 0), Chart(Side.A, "star", 2, 3)):
        x, vals, _ = chart_potential(f, c)
        np.testing.assert_allclose(chart_function(fc, c)(x), vals, atol=1e-12)


def test_chart_function_guards():
    g = GRIDS[(2, 4)]
    f = SampledPotential(g, np.zeros(len(g)))
    fc = c_transform(f, g.mirror())
    with pytest.raises(ChartSideMismatch):
        chart_function(f, Chart(Side.A, "face", 0, 1))
    with pytest.raises(NotInImage):
        chart_function(fc, Chart(Side.A, "face", 0, 1))(np.array([[-50.0, -50.0]]))


def test_chart_gradient_of_solution_fixes_facet_barycenter(solve):
    sol = solve(2, 8)
    for i in range(4):
        c = Chart(Side.A, "face", i, (i + 1) % 4)
        x = chart_to_plane(c, SimplexPoint.facet_barycenter(Side.A, 2, i))
        y = chart_c_gradient(sol.phi, c, [float(v) for v in x], f_c=sol.psi)
        np.testing.assert_allclose(y.array(), np.eye(4)[i], atol=1e-9)
