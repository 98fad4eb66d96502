"""The permutation action of ``S_{d+2}`` on both boundaries."""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import NonSymmetricSupport, ShapeError
from .geometry import AmbientVector, CellLabel, SimplexPoint


@dataclass(frozen=True)
class Permutation:
    """``image[k]`` is where index ``k`` is sent."""

    image: tuple

    def __post_init__(self):
        image = tuple(int(v) for v in self.image)
        if sorted(image) != list(range(len(image))):
            raise ShapeError(f"{image} is not a permutation")
        object.__setattr__(self, "image", image)

    def __len__(self) -> int:
        return len(self.image)

    def __mul__(self, other: "Permutation") -> "Permutation":
        """Composition ``(self * other)(k) = self(other(k))``."""
        if len(other) != len(self):
            raise ShapeError("permutations of different degree")
        return Permutation(tuple(self.image[k] for k in other.image))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.image)
        for k, v in enumerate(self.image):
            inv[v] = k
        return Permutation(tuple(inv))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def transposition(cls, n: int, a: int, b: int) -> "Permutation":
        image = list(range(n))
        image[a], image[b] = b, a
        return cls(tuple(image))

    @classmethod
    def cycle(cls, n: int) -> "Permutation":
        return cls(tuple((k + 1) % n for k in range(n)))


def generators(n: int) -> list[Permutation]:
    """A transposition and an ``n``-cycle, which generate ``S_n``."""
    return [Permutation.transposition(n, 0, 1), Permutation.cycle(n)]


def all_permutations(n: int) -> Iterable[Permutation]:
    return (Permutation(p) for p in itertools.permutations(range(n)))


def permute_tuple(image: Sequence[int], values: Sequence) -> tuple:
    out = [None] * len(values)
    for k, v in enumerate(values):
        out[image[k]] = v
    return tuple(out)


def act(g: Permutation, p):
    """Apply ``g`` to a point, an ambient vector or a stratum label."""
    if isinstance(p, CellLabel):
        return p.permuted(g.image)
    if len(g) != len(_coords(p)):
        raise ShapeError("permutation degree does not match the point")
    if isinstance(p, SimplexPoint):
        return SimplexPoint(p.side, permute_tuple(g.image, p.bary))
    if isinstance(p, AmbientVector):
        return AmbientVector(p.side, permute_tuple(g.image, p.coords))
    raise TypeError(f"cannot act on {type(p).__name__}")


def _coords(p) -> tuple:
    return p.bary if isinstance(p, SimplexPoint) else p.coords


def _distinct_arrangements(values: tuple) -> Iterable[tuple]:
    """Distinct rearrangements of a multiset, generated recursively."""
    if not values:
        yield ()
        return
    seen = set()
    for k, v in enumerate(values):
        if v in seen:
            continue
        seen.add(v)
        for rest in _distinct_arrangements(values[:k] + values[k + 1 :]):
            yield (v,) + rest


def orbit(p: SimplexPoint) -> set[SimplexPoint]:
    n = len(p.bary)
    if n <= 6:
        return {act(g, p) for g in all_permutations(n)}
    return {SimplexPoint(p.side, t) for t in _distinct_arrangements(tuple(p.bary))}


def stabilizer(p: SimplexPoint) -> tuple[list[Permutation], int]:
    """Generators and order of the stabilizer of ``p``.

    Stabilizers are products of the symmetric groups on the level sets of the
    barycentric coordinates; adjacent transpositions in each level set
    generate them.
    """
    n = len(p.bary)
    levels = defaultdict(list)
    for k, v in enumerate(p.bary):
        levels[v].append(k)
    gens, order = [], 1
    for idx in levels.values():
        order *= math.factorial(len(idx))
        gens.extend(Permutation.transposition(n, a, b) for a, b in zip(idx, idx[1:]))
    return gens, order


def fundamental_domain(points: Iterable[SimplexPoint]) -> list[tuple[SimplexPoint, int]]:
    """Lexicographically least representative and size of each orbit present."""
    groups = defaultdict(list)
    for p in points:
        groups[(p.side, tuple(sorted(p.bary)))].append(p)
    out = [(min(ps, key=lambda q: q.bary), len(ps)) for ps in groups.values()]
    return sorted(out, key=lambda t: t[0].bary)


def orbit_average(values: np.ndarray, orbit_ids: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    sizes = np.bincount(orbit_ids)
    means = np.bincount(orbit_ids, weights=values) / sizes
    return means[orbit_ids]


def symmetrize(f):
    """Orbit-average a sampled potential or a discrete measure.

    Potentials are replaced by their orbit means; measures keep each orbit's
    total mass and spread it evenly over the orbit.
    """
    grid = f.grid
    if not grid.is_g_stable():
        raise NonSymmetricSupport("sample set is not stable under the permutation group")
    if hasattr(f, "weights"):
        ids = grid.orbit_ids
        mass = np.bincount(ids, weights=f.weights)
        return replace(f, weights=(mass / np.bincount(ids))[ids])
    return replace(f, values=orbit_average(f.values, grid.orbit_ids))


def symmetry_residual(values: np.ndarray, grid, gens: Sequence[Permutation] | None = None) -> float:
    """``max |f(g x) - f(x)|`` over generators ``g`` and samples ``x``."""
    gens = generators(grid.d + 2) if gens is None else gens
    values = np.asarray(values, dtype=float)
    worst = 0.0
    for g in gens:
        idx = grid.permutation_indices(g.image)
        if np.any(idx < 0):
            raise NonSymmetricSupport("sample set is not stable under the permutation group")
        worst = max(worst, float(np.max(np.abs(values[idx] - values))))
    return worst
