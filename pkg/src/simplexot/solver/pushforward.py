"""Push ``mu`` through the c-gradient and compare binned masses with ``nu``."""
from __future__ import annotations

import numpy as np

from ..ctransform import c_gradient_map, grid_modulus
from ..geometry import classify_array
from .problem import TransportSolution

BINNINGS = ("strata", "orbits", "points")


def _bin_keys(kind: str, sol: TransportSolution, bary: np.ndarray, tie_tol: float) -> list:
    grid = sol.nu.grid
    if kind == "strata":
        I, J = classify_array(bary, tie_tol)
        return [(tuple(np.flatnonzero(i)), tuple(np.flatnonzero(j))) for i, j in zip(I, J)]
    nearest = grid.nearest(bary)
    if kind == "orbits":
        return grid.orbit_ids[nearest].tolist()
    return nearest.tolist()


def verify_pushforward(
    sol: TransportSolution,
    bins: str = "strata",
    margin: float = 1e-9,
    tie_tol: float = 1e-9,
    diameter_factor: float = 3.0,
) -> dict:
    """Total variation between ``(grad_c phi)_# mu`` and ``nu`` on a partition of B.

    ``bins`` is ``"strata"`` (labels ``(I, J)``), ``"orbits"`` or ``"points"``
    (nearest target sample).  Sources whose argmax set is wider than
    ``diameter_factor`` grid spacings carry mass that the single-valued map
    cannot place faithfully; they are listed in ``offending``.
    """
    if bins not in BINNINGS:
        raise ValueError(f"bins must be one of {BINNINGS}, got {bins!r}")
    gm = c_gradient_map(sol.phi, sol.psi, margin=margin)
    pushed_keys = _bin_keys(bins, sol, gm.image, tie_tol)
    target_keys = _bin_keys(bins, sol, sol.nu.grid.bary, tie_tol)
    mass: dict = {}
    for key, w in zip(pushed_keys, sol.mu.weights):
        mass[key] = mass.get(key, 0.0) + w
    target: dict = {}
    for key, w in zip(target_keys, sol.nu.weights):
        target[key] = target.get(key, 0.0) + w
    keys = set(mass) | set(target)
    tv = 0.5 * sum(abs(mass.get(k, 0.0) - target.get(k, 0.0)) for k in keys)
    limit = diameter_factor * sol.nu.grid.spacing
    bad = np.flatnonzero((gm.diameter > limit) & (sol.mu.weights > 0))
    return {
        "bins": bins,
        "n_bins": len(keys),
        "total_variation": float(tv),
        "grid_modulus": grid_modulus(sol.nu.grid),
        "max_argmax_diameter": float(gm.diameter.max()),
        "offending": [
            {"id": int(k), "bary": sol.mu.grid.bary[k].tolist(), "diameter": float(gm.diameter[k])} for k in bad
        ],
    }
