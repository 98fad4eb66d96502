"""Discrete symmetric transport between the two boundaries."""
from .dual import solve_dual
from .entropic import solve_scaled
from .exact import solve_exact
from .measures import DiscreteMeasure, doubling_density, doubling_estimate, make_measure
from .problem import ReducedProblem, TransportSolution, canonical_duals
from .pushforward import verify_pushforward

__all__ = [
    "DiscreteMeasure",
    "ReducedProblem",
    "TransportSolution",
    "canonical_duals",
    "doubling_density",
    "doubling_estimate",
    "make_measure",
    "solve_dual",
    "solve_exact",
    "solve_scaled",
    "verify_pushforward",
]
