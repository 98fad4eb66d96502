"""Symmetric sample grids on the boundary and their quadrature weights.

The resolution-``r`` grid is the set of lattice points of the barycentric
subdivision of every face.  Inside the chamber of an ordering
``w_{p(0)} >= w_{p(1)} >= ... >= w_{p(d)} >= w_{p(d+1)} = 0`` the points are
convex combinations of the barycenters ``b_t`` of ``{p(0), ..., p(t)}`` with
weights ``k_t / r`` for compositions ``k`` of ``r`` into ``d+1`` parts.  All
coordinates share the denominator ``r * lcm(1, ..., d+1)`` and are stored as
integer numerators, so grid arithmetic is exact.

Quadrature weights are lumped P1 masses of the Kuhn (Freudenthal)
triangulation of each chamber: every small simplex gives one unit of mass to
each of its vertices.  The chambers are congruent, so this is proportional to
the area-weighted vertex mass of a triangulation with equal-volume cells.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidDimension, ShapeError
from .geometry import Chart, CellLabel, Side, SimplexPoint


def compositions(total: int, parts: int) -> np.ndarray:
    """All compositions of ``total`` into ``parts`` nonnegative parts, lexicographic."""
    rows = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + bars + (total + parts - 1,)
        rows.append([edges[t + 1] - edges[t] - 1 for t in range(parts)])
    return np.array(rows, dtype=np.int64).reshape(-1, parts)


def kuhn_counts(d: int, r: int) -> np.ndarray:
    """Lumped mass (vertex incidences of Kuhn simplices) per composition.

    The chamber is the orthoscheme ``r >= y_1 >= ... >= y_d >= 0``; a lattice
    point ``y`` corresponds to the composition
    ``(r - y_1, y_1 - y_2, ..., y_{d-1} - y_d, y_d)``.  Returned in the order
    of :func:`compositions`.
    """
    counts = np.zeros((r + 1,) * d, dtype=np.int64)
    cubes = np.array(list(itertools.product(range(r), repeat=d)), dtype=np.int64).reshape(-1, d)
    for perm in itertools.permutations(range(d)):
        path = [cubes.copy()]
        for axis in perm:
            step = path[-1].copy()
            step[:, axis] += 1
            path.append(step)
        ok = np.ones(len(cubes), dtype=bool)
        for v in path:
            ok &= v[:, 0] <= r
            ok &= v[:, -1] >= 0
            if d > 1:
                ok &= np.all(v[:, :-1] >= v[:, 1:], axis=1)
        for v in path:
            np.add.at(counts, tuple(v[ok].T), 1)
    comps = compositions(r, d + 1)
    y = r - np.cumsum(comps[:, :-1], axis=1)
    return counts[tuple(y.T)]


def _lcm_upto(k: int) -> int:
    return math.lcm(*range(1, k + 1))


@dataclass(frozen=True, eq=False)
class Grid:
    """A finite point set on one side, with integer numerators over ``denominator``.

    ``volumes`` are quadrature masses (not normalized) aligned with the rows.
    """

    d: int
    side: Side
    numerators: np.ndarray
    denominator: int
    volumes: np.ndarray
    resolution: int = 0

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        num = np.asarray(self.numerators, dtype=np.int64)
        if num.ndim != 2 or num.shape[1] != self.d + 2:
            raise ShapeError(f"numerators must have shape (n, {self.d + 2})")
        if len(num) and (np.any(num.sum(axis=1) != self.denominator) or np.any(num.min(axis=1) != 0)):
            raise ShapeError("grid rows are not boundary points")
        object.__setattr__(self, "numerators", num)
        object.__setattr__(self, "volumes", np.asarray(self.volumes, dtype=float))

    @classmethod
    def build(cls, d: int, resolution: int, side: Side | str = Side.A) -> "Grid":
        if int(d) != d or d < 1:
            raise InvalidDimension(f"dimension must be an integer >= 1, got {d!r}")
        r = int(resolution)
        if r < 1:
            raise ValueError(f"resolution must be >= 1, got {resolution!r}")
        n = d + 2
        L = _lcm_upto(d + 1)
        comps = compositions(r, d + 1)
        # numerator of the t-th largest weight: sum_{s >= t} k_s * L / (s + 1)
        scaled = comps * (L // np.arange(1, d + 2))
        sorted_num = np.zeros((len(comps), n), dtype=np.int64)
        sorted_num[:, : d + 1] = np.cumsum(scaled[:, ::-1], axis=1)[:, ::-1]
        mass = kuhn_counts(d, r)
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        inv = np.argsort(perms, axis=1)
        rows = sorted_num[:, inv].transpose(1, 0, 2).reshape(-1, n)
        weights = np.tile(mass, len(perms)).astype(float)
        uniq, index = np.unique(rows, axis=0, return_inverse=True)
        vol = np.bincount(index.ravel(), weights=weights, minlength=len(uniq))
        return cls(d, Side(side), uniq, r * L, vol, resolution=r)

    # -- basic views -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.numerators)

    @cached_property
    def bary(self) -> np.ndarray:
        return self.numerators / self.denominator

    @property
    def spacing(self) -> float:
        """Longest edge of the subdivision's small simplices (Euclidean, barycentric)."""
        if not self.resolution:
            return float("nan")
        return math.sqrt(self.d / (self.d + 1)) / self.resolution

    def point(self, k: int) -> SimplexPoint:
        return SimplexPoint(self.side, tuple(Fraction(int(v), self.denominator) for v in self.numerators[k]))

    def points(self) -> list[SimplexPoint]:
        return [self.point(k) for k in range(len(self))]

    def mirror(self) -> "Grid":
        """The same barycentric points on the other side."""
        return Grid(self.d, self.side.opposite, self.numerators, self.denominator, self.volumes, self.resolution)

    def subset(self, mask) -> "Grid":
        mask = np.asarray(mask)
        return Grid(self.d, self.side, self.numerators[mask], self.denominator, self.volumes[mask], self.resolution)

    @cached_property
    def _keys(self) -> tuple[np.ndarray, np.ndarray]:
        keys = encode_rows(self.numerators, self.denominator)
        order = np.argsort(keys, kind="stable")
        return keys[order], order

    def lookup(self, numerators: np.ndarray) -> np.ndarray:
        """Row indices of the given numerator rows, ``-1`` where absent."""
        numerators = np.atleast_2d(np.asarray(numerators, dtype=np.int64))
        keys, order = self._keys
        q = encode_rows(numerators, self.denominator)
        pos = np.searchsorted(keys, q)
        pos = np.clip(pos, 0, max(len(keys) - 1, 0))
        found = (len(keys) > 0) & (keys[pos] == q)
        return np.where(found, order[pos], -1)

    def index_of(self, p: SimplexPoint) -> int:
        """Row index of an exact point, or -1."""
        num = []
        for b in p.bary:
            v = Fraction(b) * self.denominator
            if v.denominator != 1:
                return -1
            num.append(int(v))
        return int(self.lookup(np.array(num))[0])

    def nearest(self, bary: np.ndarray) -> np.ndarray:
        from scipy.spatial import cKDTree

        return cKDTree(self.bary).query(np.atleast_2d(bary))[1]

    # -- symmetry ------------------------------------------------------------

    @cached_property
    def orbit_ids(self) -> np.ndarray:
        """Orbit index per row; orbits are numbered by their sorted coordinates."""
        key = -np.sort(-self.numerators, axis=1)
        _, ids = np.unique(key, axis=0, return_inverse=True)
        return ids.ravel()

    @property
    def n_orbits(self) -> int:
        return int(self.orbit_ids.max()) + 1 if len(self) else 0

    @cached_property
    def orbit_representatives(self) -> np.ndarray:
        """Row index of the lexicographically least member of each orbit."""
        order = np.lexsort(self.numerators.T[::-1])
        _, first = np.unique(self.orbit_ids[order], return_index=True)
        return order[first]

    @cached_property
    def orbit_sizes(self) -> np.ndarray:
        return np.bincount(self.orbit_ids, minlength=self.n_orbits)

    def is_g_stable(self) -> bool:
        n = self.d + 2
        for o, k in enumerate(self.orbit_representatives):
            _, mult = np.unique(self.numerators[k], return_counts=True)
            full = math.factorial(n) // math.prod(math.factorial(int(m)) for m in mult)
            if full != self.orbit_sizes[o]:
                return False
        return True

    def permutation_indices(self, image: Sequence[int]) -> np.ndarray:
        """Row of ``g x`` for every row ``x``, where ``(g x)_{image[k]} = x_k``."""
        image = np.asarray(image)
        moved = np.empty_like(self.numerators)
        moved[:, image] = self.numerators
        return self.lookup(moved)

    # -- strata --------------------------------------------------------------

    @cached_property
    def label_masks(self) -> tuple[np.ndarray, np.ndarray]:
        num = self.numerators
        top = num.max(axis=1, keepdims=True)
        return num == top, num == 0

    def label(self, k: int) -> CellLabel:
        I, J = self.label_masks
        return CellLabel(frozenset(np.flatnonzero(I[k]).tolist()), frozenset(np.flatnonzero(J[k]).tolist()))

    def region_mask(self, region: CellLabel | Chart | None) -> np.ndarray:
        if region is None:
            return np.ones(len(self), dtype=bool)
        if isinstance(region, Chart):
            if region.side is not self.side:
                return np.zeros(len(self), dtype=bool)
            num = self.numerators
            if region.kind == "face":
                return num[:, region.i] == 0
            return num[:, region.i] == num.max(axis=1)
        I, J = self.label_masks
        want_I = np.zeros(self.d + 2, dtype=bool)
        want_J = np.zeros(self.d + 2, dtype=bool)
        want_I[list(region.I)] = True
        want_J[list(region.J)] = True
        return np.all(I == want_I, axis=1) & np.all(J == want_J, axis=1)

    def to_csv(self, path, labels: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "side"] + [f"w{k}" for k in range(self.d + 2)] + (["label"] if labels else []))
            for k in range(len(self)):
                row = [k, str(self.side)] + [repr(float(v)) for v in self.bary[k]]
                if labels:
                    row.append(str(self.label(k)))
                w.writerow(row)


def encode_rows(numerators: np.ndarray, denominator: int) -> np.ndarray:
    """Injective integer key per numerator row (mixed radix ``denominator + 1``)."""
    numerators = np.atleast_2d(numerators)
    base = denominator + 1
    if base ** numerators.shape[1] < 2**62:
        weights = base ** np.arange(numerators.shape[1], dtype=np.int64)
        return numerators @ weights
    # too wide for int64: fall back to Python integers
    weights = [base**k for k in range(numerators.shape[1])]
    keys = np.array([sum(int(v) * w for v, w in zip(row, weights)) for row in numerators], dtype=object)
    return keys


def sample_grid(
    d: int,
    resolution: int,
    side: Side | str = Side.A,
    region: CellLabel | Chart | None = None,
) -> list[SimplexPoint]:
    """Exact grid points of the resolution-``resolution`` subdivision inside ``region``."""
    g = Grid.build(d, resolution, side)
    mask = g.region_mask(region)
    return [g.point(k) for k in np.flatnonzero(mask)]


def grid_from_points(points: Sequence[SimplexPoint]) -> Grid:
    """Wrap exact points in a :class:`Grid` with unit volumes."""
    points = list(points)
    if not points:
        raise ShapeError("no points given")
    side = points[0].side
    if any(p.side is not side or len(p.bary) != len(points[0].bary) for p in points):
        raise ShapeError("points must share side and dimension")
    fr = [[Fraction(b) for b in p.bary] for p in points]
    den = math.lcm(*(v.denominator for row in fr for v in row))
    num = np.array([[int(v * den) for v in row] for row in fr], dtype=np.int64)
    return Grid(points[0].d, side, num, den, np.ones(len(points)))
