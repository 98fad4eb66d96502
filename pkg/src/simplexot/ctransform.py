"""c-transforms, c-subgradients and chart-wise convex potentials.

The cost is the pairing ``c(x, y) = <x, y> = 1 - (d+2) <alpha, beta>``.  For a
potential ``f`` sampled on one side, ``f^c(y) = max_x c(x, y) - f(x)`` over the
samples; the same formula with roles exchanged transforms B-side potentials.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ChartSideMismatch, NoSamples, NonsmoothPoint, NotCConvex, NotInImage, ShapeError
from .geometry import Chart, Side, SimplexPoint, chart_coords, chart_from_plane, chart_inverse, chart_to_plane
from .grid import Grid, grid_from_points

_CHUNK = 1 << 22


@dataclass(frozen=True, eq=False)
class SampledPotential:
    """Values of a potential on the rows of a :class:`Grid`.

    ``values`` is a float array, or an object array of ``Fraction`` in exact
    mode.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.dtype != object:
            values = values.astype(float)
        if values.shape != (len(self.grid),):
            raise ShapeError(f"expected {len(self.grid)} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def side(self) -> Side:
        return self.grid.side

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    def __add__(self, const) -> "SampledPotential":
        return SampledPotential(self.grid, self.values + const)

    def __sub__(self, const) -> "SampledPotential":
        return SampledPotential(self.grid, self.values - const)

    def as_float(self) -> np.ndarray:
        return self.values.astype(float)

    def at(self, p: SimplexPoint):
        k = self.grid.index_of(p)
        if k < 0:
            raise KeyError(f"{p.bary} is not a sample point")
        return self.values[k]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "value"])
            for k, v in enumerate(self.values):
                w.writerow([k, str(v) if self.exact else repr(float(v))])


def exact_potential(grid: Grid, values: Sequence) -> SampledPotential:
    arr = np.empty(len(values), dtype=object)
    arr[:] = [Fraction(v) for v in values]
    return SampledPotential(grid, arr)


def c_transform_at(f: SampledPotential, bary: np.ndarray) -> np.ndarray:
    """Float c-transform of ``f`` at arbitrary barycentric points of the other side."""
    if len(f.grid) == 0:
        raise NoSamples("c-transform of a potential with no samples")
    src = f.grid.bary
    vals = f.as_float()
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    if bary.shape[1] != src.shape[1]:
        raise ShapeError("dimension mismatch between potential and targets")
    n = src.shape[1]
    out = np.empty(len(bary))
    step = max(1, _CHUNK // max(len(src), 1))
    for s in range(0, len(bary), step):
        block = 1.0 - n * (src @ bary[s : s + step].T) - vals[:, None]
        out[s : s + step] = block.max(axis=0)
    return out


def _exact_transform(f: SampledPotential, targets: Grid) -> np.ndarray:
    n = f.grid.d + 2
    den_f = math.lcm(*(Fraction(v).denominator for v in f.values))
    F = np.array([int(Fraction(v) * den_f) for v in f.values], dtype=object)
    D1, D2 = f.grid.denominator, targets.denominator
    scale = den_f * D1 * D2
    dots = (f.grid.numerators @ targets.numerators.T).astype(object)
    block = scale - n * den_f * dots - (F * (D1 * D2))[:, None]
    best = block.max(axis=0)
    out = np.empty(len(targets), dtype=object)
    out[:] = [Fraction(int(b), scale) for b in best]
    return out


def c_transform(f: SampledPotential, targets: Grid | Sequence[SimplexPoint]) -> SampledPotential:
    """Discrete c-transform; exact when ``f`` holds ``Fraction`` values."""
    if len(f.grid) == 0:
        raise NoSamples("c-transform of a potential with no samples")
    if not isinstance(targets, Grid):
        targets = grid_from_points(targets)
    if targets.side is f.side:
        raise ShapeError("targets must lie on the opposite side")
    if targets.d != f.grid.d:
        raise ShapeError(f"dimension mismatch: {f.grid.d} vs {targets.d}")
    if f.exact:
        return SampledPotential(targets, _exact_transform(f, targets))
    return SampledPotential(targets, c_transform_at(f, targets.bary))


def project_c_convex(f: SampledPotential, dual_grid: Grid | None = None) -> SampledPotential:
    """``f^{cc}`` on ``f``'s own samples, through ``dual_grid`` (default: the mirror grid)."""
    dual_grid = f.grid.mirror() if dual_grid is None else dual_grid
    return c_transform(c_transform(f, dual_grid), f.grid)


def cost_block(src: Grid, dst: Grid, rows=None) -> np.ndarray:
    """Pairing matrix between (a subset of) rows of ``src`` and all of ``dst``."""
    a = src.bary if rows is None else src.bary[rows]
    return 1.0 - (src.d + 2) * (a @ dst.bary.T)


def argmax_sets(f: SampledPotential, f_c: SampledPotential, rows=None, margin: float = 0.0) -> list[np.ndarray]:
    """Target indices ``y`` with ``c(x, y) - f_c(y) >= f(x) - margin`` for each source row."""
    rows = np.arange(len(f.grid)) if rows is None else np.asarray(rows)
    fv, gv = f.as_float(), f_c.as_float()
    out = []
    step = max(1, _CHUNK // max(len(f_c.grid), 1))
    for s in range(0, len(rows), step):
        r = rows[s : s + step]
        gap = cost_block(f.grid, f_c.grid, r) - gv[None, :] - fv[r, None]
        out.extend(np.flatnonzero(row >= -margin) for row in gap)
    return out


def c_subgradient(f: SampledPotential, f_c: SampledPotential, x: SimplexPoint, margin: float = 0.0) -> set[SimplexPoint]:
    """Sample points of ``f_c``'s grid in the margin-relaxed c-subgradient at ``x``."""
    k = f.grid.index_of(x)
    if k >= 0 and not math.isinf(margin):
        idx = argmax_sets(f, f_c, [k], margin)[0]
    else:
        xv = float(f.at(x)) if k >= 0 else float(c_transform_at(f_c, x.array())[0])
        gap = 1.0 - (x.d + 2) * (f_c.grid.bary @ x.array()) - f_c.as_float() - xv
        idx = np.flatnonzero(gap >= -margin)
    return {f_c.grid.point(j) for j in idx}


def radial_projection(bary: np.ndarray) -> np.ndarray:
    """Push points of the solid simplex to the boundary along rays from its center."""
    bary = np.atleast_2d(bary)
    n = bary.shape[1]
    low = bary.min(axis=1, keepdims=True)
    denom = 1.0 - n * low
    safe = np.where(denom > 1e-12, denom, 1.0)
    return np.where(denom > 1e-12, (bary - low) / safe, bary)


@dataclass(frozen=True)
class GradientMap:
    """A c-gradient read off at sample points.

    ``image`` holds the selected target coordinates, ``diameter`` the
    Euclidean diameter of each argmax set and ``size`` its cardinality.
    """

    image: np.ndarray
    diameter: np.ndarray
    size: np.ndarray
    sets: list


def c_gradient_map(f: SampledPotential, f_c: SampledPotential, rows=None, margin: float = 1e-9) -> GradientMap:
    """Single-valued c-gradient at resolution.

    The argmax set's centroid is projected radially onto the boundary, which
    commutes with the permutation action and returns the argmax point itself
    when the set is a singleton.  An empty set means ``f`` exceeds
    ``(f_c)^c`` there, so ``f`` is not c-convex.
    """
    sets = argmax_sets(f, f_c, rows, margin)
    empty = [k for k, s in enumerate(sets) if not len(s)]
    if empty:
        raise NotCConvex(f"{len(empty)} samples have an empty c-subdifferential; apply project_c_convex first")
    tb = f_c.grid.bary
    image = np.empty((len(sets), tb.shape[1]))
    diam = np.zeros(len(sets))
    size = np.zeros(len(sets), dtype=np.int64)
    for k, s in enumerate(sets):
        pts = tb[s]
        size[k] = len(s)
        image[k] = pts.mean(axis=0)
        if len(s) > 1:
            diam[k] = pdist(pts).max()
    return GradientMap(radial_projection(image), diam, size, sets)


# ---------------------------------------------------------------------------
# charts


def _linear_offset(c: Chart, bary: np.ndarray) -> np.ndarray:
    """``<x, v_aux>`` for the vertex of the opposite side indexed by the chart's aux."""
    return 1.0 - (bary.shape[1]) * bary[:, c.aux]


def chart_potential(f: SampledPotential, c: Chart) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chart coordinates, chart potential values and row indices on the chart domain.

    Star charts subtract the pairing with the auxiliary vertex of the other
    side, which makes the potential convex in the chart; face charts use the
    potential itself.
    """
    if c.side is not f.side:
        raise ChartSideMismatch(f"{c} used with a {f.side}-side potential")
    rows = np.flatnonzero(f.grid.region_mask(c))
    bary = f.grid.bary[rows]
    vals = f.as_float()[rows]
    if c.kind == "star":
        vals = vals - _linear_offset(c, bary)
    return chart_coords(c, bary), vals, rows


def chart_function(f_c: SampledPotential, c: Chart):
    """The chart potential of the c-convex extension ``(f_c)^c``, as a callable.

    The callable maps an ``(k, d)`` array of chart coordinates to values; it
    is convex on the chart domain and defined on the whole chart image.
    """
    if c.side is f_c.side:
        raise ChartSideMismatch("chart_function expects the c-transform from the other side")
    d = f_c.grid.d

    def g(x):
        bary, ok = chart_inverse(c, x)
        if not ok.all():
            raise NotInImage(f"{int((~ok).sum())} chart points outside the image of {c}")
        vals = c_transform_at(f_c, bary)
        if c.kind == "star":
            vals = vals - _linear_offset(c, bary)
        return vals

    g.dim = d
    return g


@dataclass(frozen=True)
class ChartGradient:
    point: SimplexPoint
    plane_gradient: np.ndarray
    instability: float
    extremality_gap: float


def chart_gradient_details(
    f: SampledPotential,
    c: Chart,
    x: Sequence[float],
    f_c: SampledPotential | None = None,
    h: float | None = None,
    tol: float | None = None,
) -> ChartGradient:
    """Central-difference gradient of the chart potential and its c-gradient image.

    The gradient is taken with step ``h`` and ``h / 2`` (Richardson check).
    For sampled potentials the chart potential is piecewise linear at grid
    scale, so the two estimates may differ by up to one grid cell of slope;
    larger disagreement means the subdifferential is not a singleton at this
    resolution.
    """
    if c.side is not f.side:
        raise ChartSideMismatch(f"{c} used with a {f.side}-side potential")
    f_c = c_transform(f, f.grid.mirror()) if f_c is None else f_c
    d = f.grid.d
    n = d + 2
    spacing = f.grid.spacing if f.grid.resolution else 1.0 / n
    h = n * spacing / 4 if h is None else h
    tol = 3 * n * spacing if tol is None else tol
    g = chart_function(f_c, c)
    x = np.asarray(x, dtype=float)

    def grad(step):
        e = np.eye(d) * step
        vals = g(np.vstack([x + e, x - e]))
        return (vals[:d] - vals[d:]) / (2 * step)

    g1, g2 = grad(h), grad(h / 2)
    instability = float(np.max(np.abs(g1 - g2)))
    if instability > tol:
        raise NonsmoothPoint(f"chart gradient at {x.tolist()} moves by {instability:.3g} under halving")
    y = chart_from_plane(c.partner, tuple(-n * g2))
    p = chart_from_plane(c, tuple(x))
    # both potentials extended off the samples by their c-transform formulas
    fx = c_transform_at(f_c, p.array())[0]
    gy = c_transform_at(f, y.array())[0]
    pair = 1.0 - n * float(p.array() @ y.array())
    return ChartGradient(y, g2, instability, float(fx + gy - pair))


def chart_c_gradient(f: SampledPotential, c: Chart, x: Sequence[float], f_c: SampledPotential | None = None, h: float | None = None) -> SimplexPoint:
    return chart_gradient_details(f, c, x, f_c, h).point


def grid_modulus(grid: Grid) -> float:
    """Largest change of the pairing between a sample and its nearest neighbour.

    ``|c(x, y) - c(x', y)| = (d+2) |<alpha - alpha', beta>|`` is maximal at a
    vertex ``beta = e_k``, so this is ``(d+2) max |alpha_k - alpha'_k|``.
    """
    from scipy.spatial import cKDTree

    if len(grid) < 2:
        return 0.0
    _, nn = cKDTree(grid.bary).query(grid.bary, k=2)
    delta = np.abs(grid.bary - grid.bary[nn[:, 1]]).max()
    return float((grid.d + 2) * delta)
