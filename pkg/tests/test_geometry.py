from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simplexot.errors import NotOnBoundary, ShapeError
from simplexot.geometry import (
    AmbientVector,
    CellLabel,
    Chart,
    Side,
    SimplexPoint,
    chart_coords,
    chart_from_plane,
    chart_inverse,
    chart_to_plane,
    classify,
    from_barycentric,
    in_chart_domain,
    pairing,
    point_pairing,
    to_barycentric,
    vertices,
)
from simplexot.grid import Grid
from simplexot.symmetry import Permutation, act


@st.composite
def boundary_point(draw, d, side=Side.A):
    """Exact rational point with at least one zero weight."""
    n = d + 2
    raw = draw(st.lists(st.integers(0, 40), min_size=n, max_size=n).filter(lambda v: sum(v) > 0))
    zero = draw(st.integers(0, n - 1))
    raw[zero] = 0
    if sum(raw) == 0:
        raw[(zero + 1) % n] = 1
    total = sum(raw)
    return SimplexPoint(side, tuple(Fraction(v, total) for v in raw))


dims = st.integers(1, 4)


@given(st.data())
def test_vertex_pairing_reads_one_weight(data):
    d = data.draw(dims)
    x = data.draw(boundary_point(d))
    m = from_barycentric(x)
    for i, (_, n_i) in enumerate(vertices(d)):
        assert pairing(m, n_i) == 1 - (d + 2) * x.bary[i]


@given(st.data())
def test_point_pairing_matches_ambient(data):
    d = data.draw(dims)
    x = data.draw(boundary_point(d))
    y = data.draw(boundary_point(d, Side.B))
    assert point_pairing(x, y) == pairing(from_barycentric(x), from_barycentric(y))


@given(st.data())
def test_transposition_identity(data):
    d = data.draw(dims)
    n = d + 2
    x = data.draw(boundary_point(d))
    y = data.draw(boundary_point(d, Side.B))
    j, l = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    g = Permutation.transposition(n, j, l)
    lhs = point_pairing(x, act(g, y)) - point_pairing(x, y)
    a, b = x.bary, y.bary
    assert lhs == n * (a[l] - a[j]) * (b[l] - b[j])


@given(st.data())
def test_barycentric_roundtrip(data):
    d = data.draw(dims)
    side = data.draw(st.sampled_from([Side.A, Side.B]))
    x = data.draw(boundary_point(d, side))
    assert to_barycentric(from_barycentric(x)) == x


def test_vertices_are_dual():
    for d in (1, 2, 3):
        for i, (m_i, n_i) in enumerate(vertices(d)):
            for j, (m_j, _) in enumerate(vertices(d)):
                assert pairing(m_j, n_i) == (-(d + 1) if i == j else 1)


def test_b_vectors_are_classes():
    u = AmbientVector(Side.B, (0, -1, 0, 0))
    v = AmbientVector(Side.B, (2, 1, 2, 2))
    assert u == v


def test_rejects_interior_and_unnormalized():
    with pytest.raises(NotOnBoundary):
        SimplexPoint(Side.A, (Fraction(1, 4),) * 4)
    with pytest.raises(NotOnBoundary):
        SimplexPoint(Side.A, (1, 1, 0, 0))
    with pytest.raises(ShapeError):
        AmbientVector(Side.A, (1, 0, 0, 0))


def test_classify_exact_and_ties():
    p = SimplexPoint(Side.A, (Fraction(1, 2), Fraction(1, 2), 0, 0, 0))
    assert classify(p) == CellLabel({0, 1}, {2, 3, 4})
    q = SimplexPoint(Side.A, (0.4, 0.4 + 1e-13, 0.2, 0.0))
    assert classify(q) == CellLabel({0, 1}, {3})
    assert CellLabel.parse(str(classify(p))) == classify(p)


def test_label_swap_is_involution():
    lab = CellLabel({0, 2}, {1})
    assert lab.swapped().swapped() == lab
    with pytest.raises(ShapeError):
        CellLabel({0}, {0, 1})


@pytest.mark.parametrize("kind", ["star", "face"])
def test_chart_roundtrip(kind):
    d = 2
    g = Grid.build(d, 6)
    for i in range(d + 2):
        for j in range(d + 2):
            if i == j:
                continue
            c = Chart(Side.A, kind, i, j)
            for k in range(len(g)):
                p = g.point(k)
                if not in_chart_domain(c, p):
                    continue
                x = chart_to_plane(c, p)
                assert chart_from_plane(c, x) == p


def test_chart_inverse_matches_scalar_route():
    d = 3
    g = Grid.build(d, 4)
    c = Chart(Side.A, "face", 0, 2)
    mask = np.array([in_chart_domain(c, g.point(k)) for k in range(len(g))])
    x = chart_coords(c, g.bary[mask])
    bary, ok = chart_inverse(c, x)
    assert ok.all()
    np.testing.assert_allclose(bary, g.bary[mask], atol=1e-14)


def test_partner_chart_switches_side_and_kind():
    c = Chart(Side.A, "star", 0, 1)
    assert c.partner == Chart(Side.B, "face", 0, 1)
    assert c.partner.partner == c
    with pytest.raises(ShapeError):
        Chart(Side.A, "edge", 0, 1)
