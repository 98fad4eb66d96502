"""Optimal transport between the boundaries of the standard simplex and of its dual.

The cost is the pairing ``c(a, b) = 1 - (d+2) <alpha, beta>`` of barycentric
coordinates.  Modules:

``geometry``     ambient vectors, boundary points, strata labels, charts
``grid``         permutation-stable boundary grids
``symmetry``     the symmetric group action, orbits, symmetrization
``ctransform``   c-transforms, argmax sets, c-gradients, chart potentials
``solver``       exact LP, dual descent and entropic solvers
``diagnostics``  stratum census and c-gradient checks of a solution
``metric``       Hessian metric, graph distances, completion probe
``appendix``     the one-dimensional step-function example
``cli``          the ``simplexot`` command
"""
from .ctransform import (
    SampledPotential,
    argmax_sets,
    c_gradient_map,
    c_transform,
    chart_c_gradient,
    chart_function,
    chart_potential,
    exact_potential,
    project_c_convex,
)
from .errors import SimplexOTError
from .geometry import (
    AmbientVector,
    CellLabel,
    Chart,
    Side,
    SimplexPoint,
    chart_from_plane,
    chart_to_plane,
    classify,
    from_barycentric,
    pairing,
    point_pairing,
    to_barycentric,
    vertices,
)
from .grid import Grid, sample_grid
from .solver import (
    TransportSolution,
    make_measure,
    solve_dual,
    solve_exact,
    solve_scaled,
    verify_pushforward,
)
from .symmetry import Permutation, act, generators, orbit, stabilizer, symmetrize

__version__ = "0.1.0"

__all__ = [
    "AmbientVector",
    "CellLabel",
    "Chart",
    "Grid",
    "Permutation",
    "SampledPotential",
    "Side",
    "SimplexOTError",
    "SimplexPoint",
    "TransportSolution",
    "act",
    "argmax_sets",
    "c_gradient_map",
    "c_transform",
    "chart_c_gradient",
    "chart_from_plane",
    "chart_function",
    "chart_potential",
    "chart_to_plane",
    "classify",
    "exact_potential",
    "from_barycentric",
    "generators",
    "make_measure",
    "orbit",
    "pairing",
    "point_pairing",
    "project_c_convex",
    "sample_grid",
    "solve_dual",
    "solve_exact",
    "solve_scaled",
    "stabilizer",
    "symmetrize",
    "to_barycentric",
    "verify_pushforward",
    "vertices",
]
