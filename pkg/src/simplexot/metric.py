"""Hessian metrics of chart potentials and their graph approximations.

In a chart, a c-convex potential becomes a convex function ``u`` and the
metric is ``D^2 u``.  Solved potentials are only known on samples, so their
chart potentials are the c-convex extensions (piecewise affine at grid scale)
and Hessians are read off local quadratic least-squares fits over a window of
a few grid cells.  Analytic test potentials are passed as callables on chart
coordinates and differentiated by central differences.

Geodesic distances are approximated by shortest paths in a graph whose nodes
are grid points of the regular part away from the singular set and whose
edges join chart neighbours, weighted by the trapezoid rule
``(|v|_{H(u)} + |v|_{H(v)}) / 2``.  Graph distances are upper bounds for the
Riemannian distance up to discretization; nothing here bounds it from below.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .ctransform import SampledPotential, c_transform, chart_function
from .errors import BoundaryTooClose, ChartSideMismatch, InsufficientResolution, NotInImage, ShapeError
from .geometry import Chart, Side, SimplexPoint, chart_coords, chart_domain_mask, chart_inverse
from .grid import Grid

ChartPotential = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# chart potentials and domains


def in_domain(c: Chart, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rows of chart coordinates whose preimage lies in the chart's closed domain."""
    bary, ok = chart_inverse(c, x)
    return ok & chart_domain_mask(c, bary, tol)


def _directions(d: int) -> np.ndarray:
    dirs = [np.array(s, dtype=float) for s in product((-1, 0, 1), repeat=d) if any(s)]
    return np.array([v / np.linalg.norm(v) for v in dirs])


def chart_margin(c: Chart, x: Sequence[float], upper: float = 10.0, steps: int = 40) -> float:
    """Largest ``t`` (up to ``upper``) with ``x + t v`` in the domain for sampled unit directions ``v``."""
    x = np.asarray(x, dtype=float)
    dirs = _directions(len(x))
    if not in_domain(c, x[None, :])[0]:
        return 0.0
    lo, hi = 0.0, upper
    if in_domain(c, x + hi * dirs).all():
        return hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if in_domain(c, x + mid * dirs).all():
            lo = mid
        else:
            hi = mid
    return lo


def _resolve(f, c: Chart, f_c: SampledPotential | None):
    """A callable chart potential plus the default step for ``f``."""
    if callable(f) and not isinstance(f, SampledPotential):
        return f, 1e-3, False
    if not isinstance(f, SampledPotential):
        raise ShapeError(f"expected a SampledPotential or a callable, got {type(f).__name__}")
    if c.side is not f.side:
        raise ChartSideMismatch(f"{c} used with a {f.side}-side potential")
    f_c = c_transform(f, f.grid.mirror()) if f_c is None else f_c
    n = f.grid.d + 2
    return chart_function(f_c, c), n * f.grid.spacing / 2, True


# ---------------------------------------------------------------------------
# Hessians


@dataclass(frozen=True)
class ChartHessian:
    matrix: np.ndarray
    gradient: np.ndarray
    min_eigenvalue: float
    clipped: bool
    method: str
    margin: float | None = None


def _fd_hessian(g: ChartPotential, x: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    d = len(x)
    E = np.eye(d) * h
    pts = [x]
    for a in range(d):
        pts += [x + E[a], x - E[a]]
    for a, b in combinations(range(d), 2):
        pts += [x + E[a] + E[b], x + E[a] - E[b], x - E[a] + E[b], x - E[a] - E[b]]
    v = g(np.array(pts))
    H = np.zeros((d, d))
    grad = np.zeros(d)
    for a in range(d):
        p, m = v[1 + 2 * a], v[2 + 2 * a]
        H[a, a] = (p - 2 * v[0] + m) / h**2
        grad[a] = (p - m) / (2 * h)
    k = 1 + 2 * d
    for a, b in combinations(range(d), 2):
        pp, pm, mp, mm = v[k : k + 4]
        H[a, b] = H[b, a] = (pp - pm - mp + mm) / (4 * h * h)
        k += 4
    return H, grad


@lru_cache(maxsize=None)
def _stencil(d: int, half: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Offsets ``{-half..half}^d`` scaled to ``[-2, 2]`` and the quadratic design matrix on them."""
    S = np.array(list(product(range(-half, half + 1), repeat=d)), dtype=float) * (2.0 / half)
    iu = np.triu_indices(d)
    quad = S[:, iu[0]] * S[:, iu[1]]
    return S, np.hstack([np.ones((len(S), 1)), S, quad])


def _unpack_quadratic(coef: np.ndarray, d: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    grad = coef[1 : 1 + d] / h
    H = np.zeros((d, d))
    iu = np.triu_indices(d)
    q = coef[1 + d :] / h**2
    H[iu] = q
    H = H + H.T  # off-diagonal terms appear once in the design, diagonal terms carry 1/2
    return H, grad


def fit_quadratic(
    g: ChartPotential,
    x: np.ndarray,
    h: float,
    inside: Callable[[np.ndarray], np.ndarray] | None = None,
    half: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares quadratic on a stencil of radius ``2h`` (per axis) around ``x``.

    The stencil has ``2 half + 1`` points per axis.  With ``inside`` only
    stencil points it accepts are used (one-sided fits near a domain
    boundary).  Returns ``(Hessian, gradient)``.
    """
    d = len(x)
    S, A = _stencil(d, half)
    pts = x + h * S
    keep = np.ones(len(S), dtype=bool) if inside is None else inside(pts)
    if keep.sum() < 2 * A.shape[1]:
        raise BoundaryTooClose(f"only {int(keep.sum())} fit points inside the domain at {x.tolist()}")
    coef, *_ = np.linalg.lstsq(A[keep], g(pts[keep]), rcond=None)
    return _unpack_quadratic(coef, d, h)


def _clip_psd(H: np.ndarray) -> tuple[np.ndarray, float, bool]:
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    lo = float(w.min())
    if lo >= 0:
        return H, lo, False
    return (V * np.maximum(w, 0.0)) @ V.T, lo, True


def hessian_in_chart(
    f: SampledPotential | ChartPotential,
    c: Chart,
    x: Sequence[float],
    h: float | None = None,
    f_c: SampledPotential | None = None,
    check_margin: bool = True,
) -> ChartHessian:
    """Hessian of the chart potential of ``f`` at chart point ``x``.

    Callables are differentiated by central differences with step ``h``
    (default ``1e-3``).  Sampled potentials use a quadratic fit on a stencil
    of step ``h`` (default half a grid cell in chart units).  The point must
    lie at distance at least ``2h`` from the boundary of the chart domain.
    Negative eigenvalues are clipped to zero and flagged.
    """
    g, h0, sampled = _resolve(f, c, f_c)
    h = h0 if h is None else float(h)
    x = np.asarray(x, dtype=float)
    margin = None
    if check_margin:
        margin = chart_margin(c, x, upper=4 * h)
        if margin < 2 * h:
            raise BoundaryTooClose(f"margin {margin:.3g} below 2h = {2 * h:.3g} at {x.tolist()} in {c}")
    if sampled:
        # stencil corners reach 2h sqrt(d); those outside the domain are dropped
        H, grad = fit_quadratic(g, x, h, lambda p: in_domain(c, p))
        method = "quadratic-fit"
    else:
        H, grad = _fd_hessian(g, x, h)
        method = "central-difference"
    H, lo, clipped = _clip_psd(H)
    return ChartHessian(H, grad, lo, clipped, method, margin)


# ---------------------------------------------------------------------------
# isometry of the c-gradient


def isometry_residual(
    phi: SampledPotential | ChartPotential,
    psi: SampledPotential | ChartPotential,
    samples: np.ndarray,
    chart: Chart | None = None,
    h: float | None = None,
    gradient_scale: float | None = None,
    psi_hessian: Callable[[np.ndarray], np.ndarray] | None = None,
) -> dict:
    """``max |J^T H_psi(T x) J - H_phi(x)|`` over chart samples ``x``.

    ``T = s * grad(phi chart potential)`` is the chart expression of the
    c-gradient, landing in the partner chart; for sampled potentials
    ``s = -(d + 2)``.  ``J`` is the central-difference Jacobian of ``T``.
    Analytic pairs are given as callables with an explicit ``gradient_scale``
    (1 for the classical Legendre pair), no chart, and optionally the exact
    Hessian of ``psi``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    d = samples.shape[1]
    if isinstance(phi, SampledPotential):
        if chart is None:
            raise ShapeError("sampled potentials need a chart")
        if not isinstance(psi, SampledPotential) or psi.side is not chart.side.opposite:
            raise ChartSideMismatch("psi must be sampled on the other side")
        gphi, hs, _ = _resolve(phi, chart, psi)
        gpsi, hp, _ = _resolve(psi, chart.partner, phi)
        h = hs if h is None else h
        s = -(d + 2.0) if gradient_scale is None else gradient_scale
        inside_a = lambda p: in_domain(chart, p)  # noqa: E731
        inside_b = lambda p: in_domain(chart.partner, p)  # noqa: E731

        def hess_grad(g, x, step, inside):
            return fit_quadratic(g, x, step, inside)

    else:
        gphi, gpsi, hp = phi, psi, None
        h = 1e-3 if h is None else h
        s = 1.0 if gradient_scale is None else gradient_scale
        inside_a = inside_b = None

        def hess_grad(g, x, step, inside):
            return _fd_hessian(g, x, step)

    residuals = []
    scales = []
    for x in samples:
        H_phi, _ = hess_grad(gphi, x, h, inside_a)
        T = lambda z: s * hess_grad(gphi, z, h, inside_a)[1]  # noqa: E731
        J = np.empty((d, d))
        for a in range(d):
            e = np.zeros(d)
            e[a] = h
            J[:, a] = (T(x + e) - T(x - e)) / (2 * h)
        y = T(x)
        if psi_hessian is not None:
            H_psi = np.atleast_2d(psi_hessian(y))
        else:
            H_psi, _ = hess_grad(gpsi, y, hp if hp is not None else h, inside_b)
        R = J.T @ H_psi @ J - H_phi
        residuals.append(float(np.abs(R).max()))
        scales.append(float(np.abs(H_phi).max()))
    residuals = np.array(residuals)
    return {
        "samples": int(len(samples)),
        "step": h,
        "max_residual": float(residuals.max()),
        "relative_residual": float(residuals.max() / max(max(scales), 1e-300)),
        "residuals": residuals.tolist(),
    }


def interior_samples(d: int, chart: Chart, margin: float) -> np.ndarray:
    """Fixed face-chart samples (facet barycenter and its pulls toward each vertex) at least ``margin`` inside."""
    if chart.kind != "face":
        raise ShapeError("interior samples are taken in face charts")
    n = d + 2
    facet = [k for k in range(n) if k != chart.i]
    bary = np.zeros(n)
    bary[facet] = 1.0 / (d + 1)
    pts = [bary]
    for k in facet:
        e = np.zeros(n)
        e[k] = 1.0
        pts.append(0.75 * bary + 0.25 * e)
    X = chart_coords(chart, np.array(pts))
    keep = [x for x in X if chart_margin(chart, x, upper=2 * margin) >= margin]
    return np.array(keep).reshape(-1, d)


def quartic_pair():
    """``f(x) = x^4 / 4`` and its Legendre conjugate ``g(y) = (3/4)|y|^{4/3}``, with ``g''``."""
    f = lambda x: x[:, 0] ** 4 / 4  # noqa: E731
    g = lambda y: 0.75 * np.abs(y[:, 0]) ** (4.0 / 3.0)  # noqa: E731
    g2 = lambda y: np.array([[np.abs(y[0]) ** (-2.0 / 3.0) / 3.0]])  # noqa: E731
    return f, g, g2


def quartic_isometry(h: float, samples: np.ndarray | None = None) -> dict:
    """Isometry residual of the quartic pair with finite-difference step ``h``."""
    f, g, g2 = quartic_pair()
    xs = np.linspace(0.2, 0.9, 15)[:, None] if samples is None else np.atleast_2d(samples).reshape(-1, 1)
    return isometry_residual(f, g, xs, h=h, gradient_scale=1.0, psi_hessian=g2)


# ---------------------------------------------------------------------------
# singular set


def singular_skeleton(d: int, step: float) -> np.ndarray:
    """Points of the closed singular strata spaced at most ``step`` apart in each parameter.

    A stratum ``(I, J)`` with free indices ``M`` is parametrized by
    ``w_I = 1, w_M = t in [0, 1]^|M|, w_J = 0`` followed by normalization.
    """
    n = d + 2
    k = max(2, int(math.ceil(1.0 / step)) + 1)
    ts = np.linspace(0.0, 1.0, k)
    out = []
    for a in range(2, n):
        for I in combinations(range(n), a):
            rest = [i for i in range(n) if i not in I]
            for b in range(2, len(rest) + 1):
                for J in combinations(rest, b):
                    M = [i for i in rest if i not in J]
                    grid = np.array(list(product(ts, repeat=len(M)))) if M else np.zeros((1, 0))
                    w = np.zeros((len(grid), n))
                    w[:, list(I)] = 1.0
                    if M:
                        w[:, M] = grid
                    out.append(w / w.sum(axis=1, keepdims=True))
    if not out:
        return np.zeros((0, n))
    return np.unique(np.round(np.vstack(out), 15), axis=0)


@lru_cache(maxsize=16)
def _skeleton_tree(d: int, step: float):
    pts = singular_skeleton(d, step)
    return cKDTree(pts) if len(pts) else None


def distance_to_singular(bary: np.ndarray, step: float = 0.01) -> np.ndarray:
    """Euclidean distance (barycentric) to ``A_sing``, accurate to about ``step / 2``."""
    bary = np.atleast_2d(bary)
    tree = _skeleton_tree(bary.shape[1] - 2, float(step))
    if tree is None:
        return np.full(len(bary), np.inf)
    return tree.query(bary)[0]


# ---------------------------------------------------------------------------
# metric graph


def canonical_charts(side: Side, d: int, I: np.ndarray, J: np.ndarray) -> list[list[Chart]]:
    """Open charts containing each point: the star of a unique maximum, the face of a unique zero."""
    out = []
    for i_row, j_row in zip(I, J):
        charts = []
        if i_row.sum() == 1:
            i = int(np.flatnonzero(i_row)[0])
            charts.append(Chart(side, "star", i, 1 if i == 0 else 0))
        if j_row.sum() == 1:
            i = int(np.flatnonzero(j_row)[0])
            charts.append(Chart(side, "face", i, 1 if i == 0 else 0))
        out.append(charts)
    return out


@dataclass
class MetricGraph:
    d: int
    side: Side
    nodes: np.ndarray
    charts: list[Chart]
    edges: np.ndarray
    lengths: np.ndarray
    edge_charts: np.ndarray
    spacing: float
    collar: float
    singular_distance: np.ndarray
    clipped_hessians: int = 0
    hessians: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def points(self) -> list[SimplexPoint]:
        return [SimplexPoint(self.side, tuple(map(float, row))) for row in self.nodes]

    @property
    def adjacency(self) -> sparse.csr_matrix:
        n = len(self.nodes)
        i, j = self.edges.T if len(self.edges) else (np.zeros(0, int), np.zeros(0, int))
        A = sparse.coo_matrix((self.lengths, (i, j)), shape=(n, n))
        return (A + A.T).tocsr()

    def components(self) -> int:
        return int(connected_components(self.adjacency, directed=False)[0])

    def nearest(self, x) -> int:
        x = x.array() if isinstance(x, SimplexPoint) else np.asarray(x, dtype=float)
        return int(cKDTree(self.nodes).query(x)[1])

    def distances_from(self, sources) -> np.ndarray:
        return dijkstra(self.adjacency, directed=False, indices=np.atleast_1d(sources))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "length", "chart"])
            for (u, v), L, k in zip(self.edges, self.lengths, self.edge_charts):
                w.writerow([int(u), int(v), repr(float(L)), str(self.charts[k])])


def _chart_potentials(f, f_c, charts):
    cache = {}
    for c in charts:
        if c not in cache:
            cache[c] = _resolve(f, c, f_c)
    return cache


def _node_hessians(nodes, node_charts, potentials, h_fit):
    """Hessian per (node, chart), from a quadratic fit clipped to the chart domain."""
    out = {}
    clipped = 0
    by_chart: dict = {}
    for k, charts in enumerate(node_charts):
        for c in charts:
            by_chart.setdefault(c, []).append(k)
    for c, ks in by_chart.items():
        g, h0, sampled = potentials[c]
        step = h0 if h_fit is None else h_fit
        X = chart_coords(c, nodes[ks])
        for k, x in zip(ks, X):
            if sampled:
                H = _boundary_fit(g, x, step, c)
            else:
                H, _ = _fd_hessian(g, x, step)
            H, _, was = _clip_psd(H)
            clipped += was
            out[(k, c)] = H
    return out, clipped


def _boundary_fit(g, x, step, c) -> np.ndarray:
    """One-sided fit; near corners of the domain the stencil is refined, then widened."""
    inside = lambda p: in_domain(c, p)  # noqa: E731
    for half, scale in ((2, 1.0), (4, 1.0), (4, 1.5), (6, 2.0)):
        try:
            return fit_quadratic(g, x, step * scale, inside, half)[0]
        except BoundaryTooClose:
            continue
    raise BoundaryTooClose(f"no usable fit stencil at {x.tolist()} in {c}")


def _graph(d, side, nodes, node_charts, potentials, spacing, collar, sing, edge_radius, h_fit) -> MetricGraph:
    hess, clipped = _node_hessians(nodes, node_charts, potentials, h_fit)
    charts = sorted({c for cs in node_charts for c in cs}, key=str)
    index = {c: k for k, c in enumerate(charts)}
    pairs = cKDTree(nodes).query_pairs(edge_radius, output_type="ndarray")
    edges, lengths, kinds = [], [], []
    for u, v in pairs:
        shared = [c for c in node_charts[u] if c in node_charts[v]]
        best = None
        for c in shared:
            xu, xv = chart_coords(c, nodes[[u, v]])
            vec = xv - xu
            L = 0.5 * (math.sqrt(max(vec @ hess[(u, c)] @ vec, 0.0)) + math.sqrt(max(vec @ hess[(v, c)] @ vec, 0.0)))
            if best is None or L < best[0]:
                best = (L, index[c])
        if best is not None:
            edges.append((u, v))
            lengths.append(best[0])
            kinds.append(best[1])
    return MetricGraph(
        d,
        side,
        nodes,
        charts,
        np.array(edges, dtype=int).reshape(-1, 2),
        np.array(lengths),
        np.array(kinds, dtype=int),
        spacing,
        collar,
        sing,
        clipped,
        hess,
    )


def build_metric_graph(
    f: SampledPotential | ChartPotential,
    resolution: int,
    f_c: SampledPotential | None = None,
    chart: Chart | None = None,
    d: int | None = None,
    collar_factor: float = 2.0,
    edge_factor: float = 3.0,
    h_fit: float | None = None,
) -> MetricGraph:
    """Graph approximation of ``(A_reg, g_f)`` on the grid of the given resolution.

    Nodes are grid points at distance at least ``collar_factor * spacing``
    from the singular set.  With a ``chart`` only nodes in that chart's open
    domain are used, which is how analytic test potentials (callables on the
    chart's coordinates) are handled; ``d`` is then required.
    """
    if isinstance(f, SampledPotential):
        d, side = f.grid.d, f.side
    elif chart is None or d is None:
        raise ShapeError("a callable potential needs an explicit chart and dimension")
    else:
        side = chart.side
    grid = Grid.build(d, resolution, side)
    h = grid.spacing
    collar = collar_factor * h
    sing = distance_to_singular(grid.bary, step=min(0.01, h / 10))
    keep = sing >= collar
    I, J = grid.label_masks
    node_charts = canonical_charts(side, d, I, J)
    if chart is not None:
        node_charts = [[chart] if chart in cs or _in_open(chart, grid.bary[k]) else [] for k, cs in enumerate(node_charts)]
    keep &= np.array([bool(cs) for cs in node_charts])
    idx = np.flatnonzero(keep)
    nodes = grid.bary[idx]
    node_charts = [node_charts[k] for k in idx]
    if chart is not None:
        potentials = {chart: _resolve(f, chart, f_c)}
    else:
        potentials = _chart_potentials(f, f_c, {c for cs in node_charts for c in cs})
    return _graph(d, side, nodes, node_charts, potentials, h, collar, sing[idx], edge_factor * h, h_fit)


def _in_open(c: Chart, bary: np.ndarray) -> bool:
    if c.kind == "face":
        return bary[c.i] == 0 and np.count_nonzero(bary == 0) == 1
    return bool(np.count_nonzero(bary == bary.max()) == 1 and bary[c.i] == bary.max())


def distance(graph: MetricGraph, x, y) -> float:
    """Shortest-path distance between the nodes nearest to ``x`` and ``y``; ``inf`` if unreachable."""
    u, v = graph.nearest(x), graph.nearest(y)
    if u == v:
        return 0.0
    return float(graph.distances_from(u)[0, v])


# ---------------------------------------------------------------------------
# distance bounds


def distance_bound_scan(graph: MetricGraph, window: tuple[float, float] | None = None) -> dict:
    """Upper Hölder envelope ``d_hat <= C d_E^beta`` and lower bound ``d_hat >= delta_K d_E``.

    ``beta`` is the log-log least-squares slope over reachable pairs (within
    ``window`` of Euclidean distances if given), clipped to ``(0, 1]``; ``C``
    is the least constant making the envelope hold on every reachable pair.
    ``K`` is the set of nodes at distance at least twice the collar from the
    singular set.
    """
    D = graph.distances_from(np.arange(len(graph)))
    iu = np.triu_indices(len(graph), 1)
    dg = D[iu]
    de = np.linalg.norm(graph.nodes[iu[0]] - graph.nodes[iu[1]], axis=1)
    reach = np.isfinite(dg) & (de > 0)
    unreachable = int((~np.isfinite(dg)).sum())
    sel = reach & (dg > 0)
    if window is not None:
        sel &= (de >= window[0]) & (de <= window[1])
    if sel.sum() < 3:
        raise InsufficientResolution("too few reachable pairs for an envelope fit")
    x, y = np.log(de[sel]), np.log(dg[sel])
    slope, _ = np.polyfit(x, y, 1)
    beta = float(np.clip(slope, 1e-6, 1.0))
    C = float(np.exp((np.log(dg[reach & (dg > 0)]) - beta * np.log(de[reach & (dg > 0)])).max()))
    violations = int((dg[reach] > C * de[reach] ** beta * (1 + 1e-12)).sum())
    inner = graph.singular_distance >= 2 * graph.collar
    k_pairs = reach & inner[iu[0]] & inner[iu[1]]
    delta = float((dg[k_pairs] / de[k_pairs]).min()) if k_pairs.any() else None
    return {
        "nodes": int(len(graph)),
        "pairs": int(reach.sum()),
        "unreachable_pairs": unreachable,
        "C": C,
        "beta": beta,
        "slope": float(slope),
        "violations": violations,
        "delta_K": delta,
        "K_nodes": int(inner.sum()),
        "K_pairs": int(k_pairs.sum()),
    }


def envelope_violations(graph: MetricGraph, C: float, beta: float, region: float = 0.0) -> dict:
    """Pairs of ``graph`` breaking ``d_hat <= C d_E^beta`` for an envelope fitted elsewhere.

    On the graph the envelope was fitted on, violations are zero by the choice
    of ``C``; run this on a finer graph to test the fit at smaller scales.
    ``region`` restricts the count to pairs whose endpoints both lie at least
    that far from the singular set (pass the collar of the fitting graph to
    compare like with like); pairs closer in are counted separately.
    """
    D = graph.distances_from(np.arange(len(graph)))
    iu = np.triu_indices(len(graph), 1)
    dg = D[iu]
    de = np.linalg.norm(graph.nodes[iu[0]] - graph.nodes[iu[1]], axis=1)
    reach = np.isfinite(dg) & (de > 0)
    far = np.minimum(graph.singular_distance[iu[0]], graph.singular_distance[iu[1]]) >= region
    bad = reach & (dg > C * np.where(de > 0, de, 1.0) ** beta * (1 + 1e-12))
    inside = reach & far
    ratio = dg[inside] / (C * de[inside] ** beta)
    return {
        "pairs": int(inside.sum()),
        "violations": int((bad & far).sum()),
        "max_ratio": float(ratio.max()) if inside.any() else None,
        "min_euclidean": float(de[inside].min()) if inside.any() else None,
        "region": region,
        "pairs_closer_in": int((reach & ~far).sum()),
        "violations_closer_in": int((bad & ~far).sum()),
    }


def jensen_segments(
    f: SampledPotential | ChartPotential,
    f_c: SampledPotential | None = None,
    charts: Sequence[Chart] | None = None,
    n_segments: int = 20,
    points: int = 201,
    seed: int = 0,
    d: int | None = None,
) -> dict:
    """Check ``int_0^1 sqrt(h'') <= sqrt(h'(1) - h'(0))`` for ``h(t) = u((1-t) x + t y)``.

    ``u`` is a face-chart potential and ``x, y`` are random points of the
    open facet.  Second derivatives are discrete second differences on
    ``points`` nodes and ``h'(1) - h'(0)`` is their sum, so both sides are
    built from the same samples.
    """
    if isinstance(f, SampledPotential):
        d, side = f.grid.d, f.side
    elif d is None or not charts:
        raise ShapeError("callable potentials need explicit charts and dimension")
    else:
        side = charts[0].side
    charts = [Chart(side, "face", i, 1 if i == 0 else 0) for i in range(d + 2)] if charts is None else charts
    rng = np.random.default_rng(seed)
    n = d + 2
    t = np.linspace(0.0, 1.0, points)
    dt = t[1] - t[0]
    rows = []
    for c in charts:
        g, _, _ = _resolve(f, c, f_c)
        for _ in range(n_segments):
            # uniform points of the open facet, in its chart (u_k = n w_k)
            ends = rng.dirichlet(np.ones(d + 1), size=2)
            x, y = n * ends[0, :d], n * ends[1, :d]
            seg = x[None, :] + t[:, None] * (y - x)[None, :]
            hv = g(seg)
            h2 = np.diff(hv, 2) / dt**2
            neg = float(min(h2.min(), 0.0))
            h2 = np.maximum(h2, 0.0)
            lhs = float(np.sqrt(h2).sum() * dt)
            rhs = float(math.sqrt(h2.sum() * dt))
            rows.append({"chart": str(c), "lhs": lhs, "rhs": rhs, "holds": lhs <= rhs * (1 + 1e-12) + 1e-15, "min_second_difference": neg})
    return {
        "segments": len(rows),
        "violations": sum(not r["holds"] for r in rows),
        "max_ratio": max((r["lhs"] / r["rhs"] for r in rows if r["rhs"] > 0), default=0.0),
        "rows": rows,
    }


# ---------------------------------------------------------------------------
# completion probe


def singular_vertex_pairs(d: int) -> list[tuple[np.ndarray, np.ndarray, str]]:
    """Endpoints of every singular edge: positive vertex, negative vertex, edge label."""
    if d != 3:
        raise ShapeError("adjacent singular vertices are defined for d = 3")
    n = d + 2
    out = []
    for I in combinations(range(n), 2):
        rest = [k for k in range(n) if k not in I]
        for J in combinations(rest, 2):
            (k,) = [m for m in rest if m not in J]
            pos = np.zeros(n)
            pos[list(I)] = 0.5
            neg = np.zeros(n)
            neg[list(I) + [k]] = 1.0 / 3.0
            label = f"{','.join(map(str, I))}|{','.join(map(str, J))}"
            out.append((pos, neg, label))
    return out


def boundary_lattice(d: int, R: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Points ``k / R`` of the boundary (some ``k_i = 0``) inside the box ``[lo, hi]``."""
    n = d + 2
    klo = np.maximum(np.ceil(lo * R - 1e-9), 0).astype(int)
    khi = np.minimum(np.floor(hi * R + 1e-9), R).astype(int)
    out = []
    for z in range(n):
        if klo[z] > 0:
            continue
        free = [k for k in range(n) if k != z][:-1]
        last = [k for k in range(n) if k != z][-1]
        axes = [np.arange(klo[k], khi[k] + 1) for k in free]
        if any(len(a) == 0 for a in axes):
            continue
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free))
        k_last = R - mesh.sum(axis=1)
        ok = (k_last >= klo[last]) & (k_last <= khi[last])
        pts = np.zeros((int(ok.sum()), n), dtype=int)
        pts[:, free] = mesh[ok]
        pts[:, last] = k_last[ok]
        out.append(pts)
    if not out:
        return np.zeros((0, n))
    return np.unique(np.vstack(out), axis=0) / R


def _tube_graph(f, f_c, m1, m2, eps, factor, collar_factor, edge_factor, h_fit) -> MetricGraph:
    d = len(m1) - 2
    side = f.side if isinstance(f, SampledPotential) else Side.A
    h = eps / factor
    R = int(math.ceil(math.sqrt(2.0) / h))
    spacing = math.sqrt(2.0) / R
    pad = eps + 2 * spacing
    lo = np.minimum(m1, m2) - pad
    hi = np.maximum(m1, m2) + pad
    pts = boundary_lattice(d, R, lo, hi)
    # keep the tube around the segment [m1, m2]
    seg = m2 - m1
    t = np.clip(((pts - m1) @ seg) / max(seg @ seg, 1e-300), 0.0, 1.0)
    near = np.linalg.norm(pts - (m1 + t[:, None] * seg), axis=1) <= pad
    pts = pts[near]
    collar = collar_factor * spacing
    sing = distance_to_singular(pts, step=min(0.01, spacing / 10))
    pts, sing = pts[sing >= collar], sing[sing >= collar]
    top = pts.max(axis=1, keepdims=True)
    I = np.isclose(pts, top, rtol=0, atol=1e-12)
    J = pts <= 1e-12
    node_charts = canonical_charts(side, d, I, J)
    potentials = _chart_potentials(f, f_c, {c for cs in node_charts for c in cs})
    return _graph(d, side, pts, node_charts, potentials, spacing, collar, sing, edge_factor * spacing, h_fit)


def _ball_distance(graph: MetricGraph, m1, m2, eps) -> tuple[float, int, int]:
    """Least graph distance between distinct nodes within ``eps`` of ``m1`` and of ``m2``."""
    e1 = np.linalg.norm(graph.nodes - m1, axis=1) <= eps
    e2 = np.linalg.norm(graph.nodes - m2, axis=1) <= eps
    a, b = np.flatnonzero(e1), np.flatnonzero(e2)
    if len(a) == 0 or len(b) == 0:
        return math.inf, len(a), len(b)
    both = e1 & e2
    A = graph.adjacency
    D = dijkstra(A, directed=False, indices=a, min_only=True)
    best = D[b[~both[b]]].min() if np.any(~both[b]) else math.inf
    for k in np.flatnonzero(both):
        dk = dijkstra(A, directed=False, indices=k)
        others = a[a != k]
        if len(others):
            best = min(best, float(dk[others].min()))
    return float(best), len(a), len(b)


def classify_trend(values: Sequence[float]) -> str:
    """``bounded-below`` if the last value keeps half of the first, ``decreasing`` if it falls monotonically below that."""
    vals = [v for v in values if np.isfinite(v)]
    if len(vals) < 2 or len(vals) < len(values):
        return "inconclusive"
    if vals[-1] >= 0.5 * vals[0]:
        return "bounded-below"
    if all(b <= a for a, b in zip(vals, vals[1:])):
        return "decreasing"
    return "inconclusive"


def completion_probe(
    f: SampledPotential,
    f_c: SampledPotential | None = None,
    eps_ladder: Sequence[float] = (0.2, 0.1, 0.05),
    pairs: Sequence[int] | None = None,
    factor: float = 3.0,
    collar_factor: float = 2.0,
    edge_factor: float = 3.0,
    h_fit: float | None = None,
    use_symmetry: bool = True,
) -> dict:
    """Graph distances between shrinking neighbourhoods of adjacent singular vertices.

    For every singular edge with endpoints ``(m, m')`` and each ``eps`` the
    table reports the least graph distance between distinct nodes within
    ``eps`` of ``m`` and of ``m'``.  Each ``eps`` uses a graph of spacing
    about ``eps / factor`` restricted to a tube around the edge; Hessians
    come from the solved potential at its own resolution.  The values are
    upper bounds on the Riemannian distance between the neighbourhoods.

    With ``use_symmetry`` one edge per symmetry orbit is computed, a second
    edge is computed as a cross-check, and the remaining rows are copied from
    their orbit representative (the potential and the lattice are
    permutation invariant).
    """
    if not isinstance(f, SampledPotential):
        raise ShapeError("completion_probe expects a solved potential")
    d = f.grid.d
    eps_ladder = [float(e) for e in eps_ladder]
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])) or min(eps_ladder) <= 0:
        raise InsufficientResolution("eps ladder must be positive and strictly decreasing")
    f_c = c_transform(f, f.grid.mirror()) if f_c is None else f_c
    all_pairs = singular_vertex_pairs(d)
    chosen = range(len(all_pairs)) if pairs is None else pairs
    to_compute = list(chosen)
    if use_symmetry and pairs is None:
        to_compute = [0, 1]  # one orbit: edge 0 is the representative, edge 1 the cross-check

    def ladder(k):
        m1, m2, _ = all_pairs[k]
        vals, sizes = [], []
        for eps in eps_ladder:
            g = _tube_graph(f, f_c, m1, m2, eps, factor, collar_factor, edge_factor, h_fit)
            val, na, nb = _ball_distance(g, m1, m2, eps)
            if na == 0 or nb == 0:
                raise InsufficientResolution(f"no graph nodes within eps={eps} of an endpoint of edge {all_pairs[k][2]}")
            vals.append(val)
            sizes.append({"nodes": len(g), "near_m": na, "near_m_prime": nb, "spacing": g.spacing, "clipped": g.clipped_hessians})
        return vals, sizes

    computed = {k: ladder(k) for k in to_compute}
    rows = []
    for k in chosen:
        m1, m2, label = all_pairs[k]
        if k in computed:
            vals, sizes = computed[k]
            source = "computed"
        else:
            vals, sizes = computed[0]
            source = "symmetry"
        rows.append(
            {
                "edge": label,
                "m": m1.tolist(),
                "m_prime": m2.tolist(),
                "eps": eps_ladder,
                "distance": vals,
                "graphs": sizes,
                "trend": classify_trend(vals),
                "source": source,
            }
        )
    check = None
    if use_symmetry and pairs is None:
        a, b = computed[0][0], computed[1][0]
        check = float(max(abs(x - y) for x, y in zip(a, b)))
    trends = {r["trend"] for r in rows}
    return {
        "d": d,
        "eps_ladder": eps_ladder,
        "eps_monotone": all(b < a for a, b in zip(eps_ladder, eps_ladder[1:])),
        "pairs": len(rows),
        "rows": rows,
        "symmetry_check": check,
        "classification": trends.pop() if len(trends) == 1 else "inconclusive",
        "note": "graph distances are upper bounds; a decreasing trend does not show collapse",
    }


def reflexive_probe(f: SampledPotential, f_c: SampledPotential | None = None, eps_ladder=(0.2, 0.1, 0.05), **kw) -> list[float]:
    """Probe values for ``m = m'`` (a positive vertex paired with itself)."""
    f_c = c_transform(f, f.grid.mirror()) if f_c is None else f_c
    m = singular_vertex_pairs(f.grid.d)[0][0]
    factor = kw.get("factor", 3.0)
    out = []
    for eps in eps_ladder:
        g = _tube_graph(f, f_c, m, m, eps, factor, kw.get("collar_factor", 2.0), kw.get("edge_factor", 3.0), kw.get("h_fit"))
        out.append(_ball_distance(g, m, m, eps)[0])
    return out
