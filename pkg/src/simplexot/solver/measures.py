"""Symmetric discrete measures on the sample grids."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..errors import InvalidDensity, NonSymmetricSupport
from ..geometry import Chart, Side, chart_coords
from ..grid import Grid
from ..symmetry import symmetrize

PROVENANCES = ("uniform", "user-density", "doubling-test-family")


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    grid: Grid
    weights: np.ndarray
    provenance: str = "uniform"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.grid),):
            raise InvalidDensity(f"expected {len(self.grid)} weights, got shape {w.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidDensity("weights must be nonnegative and sum to 1")
        if self.provenance not in PROVENANCES:
            raise InvalidDensity(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "weights", w)

    @property
    def side(self) -> Side:
        return self.grid.side

    @property
    def orbit_masses(self) -> np.ndarray:
        return np.bincount(self.grid.orbit_ids, weights=self.weights, minlength=self.grid.n_orbits)


def doubling_density(amplitude: float = 0.5, frequency: int = 2) -> Callable[[np.ndarray], np.ndarray]:
    """A symmetric density with values in ``[1 - amplitude, 1 + amplitude]``.

    It oscillates with the power sum ``sum_k w_k^2``, which is invariant under
    permutations; ``0 <= amplitude < 1`` keeps it bounded away from 0 and
    infinity, hence doubling on convex chart subsets.
    """
    if not 0 <= amplitude < 1:
        raise InvalidDensity(f"amplitude must lie in [0, 1), got {amplitude}")

    def density(bary: np.ndarray) -> np.ndarray:
        s = np.sum(np.asarray(bary) ** 2, axis=1)
        return 1.0 + amplitude * np.cos(2 * np.pi * frequency * s)

    density.provenance = "doubling-test-family"
    return density


def _resolve(spec) -> tuple[Callable | None, str]:
    if spec is None or spec == "uniform":
        return None, "uniform"
    if callable(spec):
        return spec, getattr(spec, "provenance", "user-density")
    if isinstance(spec, Mapping):
        kind = spec.get("kind", "uniform")
        if kind == "uniform":
            return None, "uniform"
        if kind == "doubling":
            return doubling_density(spec.get("amplitude", 0.5), spec.get("frequency", 2)), "doubling-test-family"
        raise InvalidDensity(f"unknown density kind {kind!r}")
    if spec == "doubling":
        return doubling_density(), "doubling-test-family"
    raise InvalidDensity(f"unknown density spec {spec!r}")


def make_measure(spec, grid: Grid) -> DiscreteMeasure:
    """Density times quadrature volume, normalized and orbit-averaged.

    ``spec`` is ``"uniform"``, ``"doubling"``, a mapping with a ``kind`` key,
    or a callable taking an ``(n, d+2)`` barycentric array.
    """
    if not grid.is_g_stable():
        raise NonSymmetricSupport("measure support must be stable under the permutation group")
    density, provenance = _resolve(spec)
    values = np.ones(len(grid)) if density is None else np.asarray(density(grid.bary), dtype=float)
    if values.shape != (len(grid),) or not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise InvalidDensity("density must be finite and strictly positive on the support")
    w = values * grid.volumes
    if np.any(w <= 0):
        raise InvalidDensity("a support point has zero quadrature volume")
    m = DiscreteMeasure(grid, w / w.sum(), provenance)
    m = symmetrize(m)
    return DiscreteMeasure(grid, m.weights / m.weights.sum(), provenance)


def doubling_estimate(
    measure: DiscreteMeasure,
    face: int = 0,
    n_sets: int = 200,
    seed: int = 0,
    min_points: int = 8,
) -> float:
    """Largest observed ``mu(K) / mu(K/2)`` over random balls ``K`` in one face chart.

    ``K/2`` is the dilation of ``K`` by one half about its center of mass;
    sets whose half-dilate holds fewer than ``min_points`` samples are
    skipped, since the ratio is then dominated by the grid.
    """
    grid = measure.grid
    c = Chart(grid.side, "face", face, (face + 1) % (grid.d + 2))
    rows = np.flatnonzero(grid.region_mask(c))
    x = chart_coords(c, grid.bary[rows])
    w = measure.weights[rows]
    rng = np.random.default_rng(seed)
    worst = 0.0
    diam = np.ptp(x, axis=0).max()
    for _ in range(n_sets):
        center = x[rng.integers(len(x))]
        radius = rng.uniform(0.2, 0.6) * diam
        inside = np.linalg.norm(x - center, axis=1) <= radius
        if inside.sum() < min_points:
            continue
        com = np.average(x[inside], axis=0, weights=w[inside])
        # y is in K/2 iff com + 2 (y - com) is in K
        stretched = com + 2 * (x - com)
        n = grid.d + 2
        in_face = np.all(stretched >= -1e-12, axis=1) & (stretched.sum(axis=1) <= n + 1e-12)
        half = in_face & (np.linalg.norm(stretched - center, axis=1) <= radius)
        if half.sum() < min_points:
            continue
        worst = max(worst, w[inside].sum() / w[half].sum())
    return worst
